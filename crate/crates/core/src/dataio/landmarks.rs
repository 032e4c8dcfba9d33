//! Landmark files and dataset directories.
//!
//! A landmark file is plain text:
//!
//! ```text
//! version 1
//! n_points 3
//! 10.5 20
//! 31 22.25
//! 20 40
//! box 5 15 30 30
//! ```
//!
//! The trailing `box x y w h` line is optional. A dataset directory holds
//! `<stem>.pgm` images next to `<stem>.lmk` landmark files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataio::image::{load_image, Image};
use crate::error::{EsrError, Result};
use crate::geometry::{BoundingBox, Shape};

pub const LANDMARK_FORMAT_VERSION: u32 = 1;
pub const LANDMARK_EXTENSION: &str = "lmk";
pub const IMAGE_EXTENSION: &str = "pgm";

/// Significant digits used when printing landmark coordinates.
const LANDMARK_DIGITS: usize = 9;

/// A parsed landmark file.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks {
    pub shape: Shape,
    pub face_box: Option<BoundingBox>,
}

pub fn parse_landmarks(text: &str) -> std::result::Result<Landmarks, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, version) = lines.next().ok_or("empty landmark file")?;
    match version.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["version", v] if v.parse::<u32>() == Ok(LANDMARK_FORMAT_VERSION) => {}
        _ => return Err(format!("line {ln}: expected `version {LANDMARK_FORMAT_VERSION}`")),
    }
    let (ln, count) = lines.next().ok_or("missing n_points line")?;
    let n: usize = match count.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["n_points", n] => n
            .parse()
            .map_err(|_| format!("line {ln}: bad point count {n:?}"))?,
        _ => return Err(format!("line {ln}: expected `n_points N`")),
    };

    let mut coords = Vec::with_capacity(2 * n);
    let mut face_box = None;
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "box" {
            if face_box.is_some() {
                return Err(format!("line {ln}: duplicate box line"));
            }
            let v = parse_floats(&fields[1..], ln)?;
            if v.len() != 4 {
                return Err(format!("line {ln}: box needs 4 values"));
            }
            face_box = Some(BoundingBox::new(v[0], v[1], v[2], v[3]));
            continue;
        }
        if face_box.is_some() {
            return Err(format!("line {ln}: points after box line"));
        }
        let v = parse_floats(&fields, ln)?;
        if v.len() != 2 {
            return Err(format!("line {ln}: expected `x y`"));
        }
        coords.extend(v);
    }
    if coords.len() != 2 * n {
        return Err(format!(
            "declared {n} points but found {}",
            coords.len() / 2
        ));
    }
    let shape = Shape::new(coords).map_err(|e| e.to_string())?;
    Ok(Landmarks { shape, face_box })
}

fn parse_floats(fields: &[&str], ln: usize) -> std::result::Result<Vec<f64>, String> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {ln}: bad number {f:?}"))
        })
        .collect()
}

/// Formats `v` with `digits` significant digits in plain decimal notation.
pub(crate) fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exponent = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn format_landmarks(shape: &Shape, face_box: Option<&BoundingBox>) -> String {
    let f = |v| format_significant(v, LANDMARK_DIGITS);
    let mut out = format!(
        "version {LANDMARK_FORMAT_VERSION}\nn_points {}\n",
        shape.n_fp()
    );
    for (x, y) in shape.points() {
        out.push_str(&format!("{} {}\n", f(x), f(y)));
    }
    if let Some(b) = face_box {
        out.push_str(&format!(
            "box {} {} {} {}\n",
            f(b.x),
            f(b.y),
            f(b.width),
            f(b.height)
        ));
    }
    out
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<Landmarks> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EsrError::io(path, e))?;
    parse_landmarks(&text).map_err(|m| EsrError::format(path, m))
}

pub fn save_landmarks(
    path: impl AsRef<Path>,
    shape: &Shape,
    face_box: Option<&BoundingBox>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_landmarks(shape, face_box)).map_err(|e| EsrError::io(path, e))
}

/// One image/landmark pair of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub image_path: PathBuf,
    pub landmark_path: PathBuf,
}

/// A dataset entry read into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSample {
    pub image: Image,
    pub shape: Shape,
    pub face_box: Option<BoundingBox>,
}

/// Lists `<stem>.pgm` files that have a matching `<stem>.lmk`, sorted by name.
pub fn list_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let dir = dir.as_ref();
    let read = fs::read_dir(dir).map_err(|e| EsrError::io(dir, e))?;
    let mut entries = Vec::new();
    for item in read {
        let path = item.map_err(|e| EsrError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(IMAGE_EXTENSION) {
            continue;
        }
        let landmark_path = path.with_extension(LANDMARK_EXTENSION);
        if landmark_path.is_file() {
            entries.push(DatasetEntry {
                image_path: path,
                landmark_path,
            });
        }
    }
    entries.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    Ok(entries)
}

/// Loads every entry, checking that all shapes share one landmark count.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<LoadedSample>> {
    use rayon::prelude::*;
    let entries = list_dataset(&dir)?;
    if entries.is_empty() {
        return Err(EsrError::format(dir.as_ref(), "no .pgm/.lmk pairs found"));
    }
    let samples = entries
        .par_iter()
        .map(|e| {
            let image = load_image(&e.image_path)?;
            let lm = load_landmarks(&e.landmark_path)?;
            Ok(LoadedSample {
                image,
                shape: lm.shape,
                face_box: lm.face_box,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_fp = samples[0].shape.n_fp();
    for (s, e) in samples.iter().zip(&entries) {
        if s.shape.n_fp() != n_fp {
            return Err(EsrError::format(
                &e.landmark_path,
                format!("{} landmarks, dataset uses {n_fp}", s.shape.n_fp()),
            ));
        }
    }
    Ok(samples)
}
