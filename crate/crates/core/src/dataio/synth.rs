//! Synthetic deformable-shape dataset.
//!
//! A fixed base layout (two "eye" points, a face outline ellipse and an inner
//! ring) is deformed along three smooth orthonormal modes, posed by a random
//! similarity and rendered as Gaussian intensity blobs over a background
//! gradient with additive pixel noise.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataio::image::{save_pgm, Image};
use crate::dataio::landmarks::{save_landmarks, DatasetEntry, LoadedSample, IMAGE_EXTENSION, LANDMARK_EXTENSION};
use crate::error::{EsrError, Result};
use crate::geometry::{Shape, SimilarityTransform};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub n_fp: usize,
    /// Square image side in pixels.
    pub image_size: usize,
    /// Standard deviation of additive pixel noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Standard deviation of each deformation-mode coefficient.
    pub mode_sigma: f64,
    /// Uniform range of the pose scale factor.
    pub scale_range: (f64, f64),
    /// Rotation drawn uniformly from `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    /// Whether the face center is jittered inside the image margins.
    pub jitter_translation: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 200,
            n_fp: 29,
            image_size: 128,
            noise_sigma: 2.0,
            seed: 7,
            mode_sigma: 1.0,
            scale_range: (0.8, 1.25),
            max_rotation_deg: 25.0,
            jitter_translation: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EsrError::InvalidParameter(m));
        if self.count == 0 {
            return bad("count must be >= 1".into());
        }
        if self.n_fp < 4 {
            return bad(format!("n_fp must be >= 4, got {}", self.n_fp));
        }
        if self.image_size < 16 {
            return bad(format!("image size must be >= 16, got {}", self.image_size));
        }
        if !(self.noise_sigma >= 0.0) || !(self.mode_sigma >= 0.0) {
            return bad("noise and mode sigmas must be >= 0".into());
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("invalid scale range ({lo}, {hi})"));
        }
        Ok(())
    }
}

/// Face extent relative to the image side at pose scale 1.
const FACE_FRACTION: f64 = 0.3;
/// Blob radius relative to the face scale.
const BLOB_SIGMA: f64 = 0.12;

/// Base layout in a unit face frame: landmarks 0 and 1 are the eyes, then the
/// outline ellipse, then an inner ring.
pub fn base_shape(n_fp: usize) -> Result<Shape> {
    if n_fp < 4 {
        return Err(EsrError::InvalidParameter(format!("n_fp must be >= 4, got {n_fp}")));
    }
    let inner = (n_fp - 2) / 3;
    let outline = n_fp - 2 - inner;
    let mut pts = vec![(-0.35, -0.25), (0.35, -0.25)];
    for k in 0..outline {
        let a = 2.0 * PI * k as f64 / outline as f64;
        pts.push((0.75 * a.cos(), 0.95 * a.sin()));
    }
    for k in 0..inner {
        let a = -PI / 2.0 + 2.0 * PI * k as f64 / inner as f64;
        pts.push((0.3 * a.cos(), 0.25 + 0.2 * a.sin()));
    }
    Shape::from_points(&pts)
}

/// Three orthonormal deformation fields over the base layout: anisotropic
/// stretch, a quadratic vertical bend and a horizontal shear.
pub fn deformation_modes(base: &Shape) -> Vec<Vec<f64>> {
    let n = base.n_fp() as f64;
    let mean_x2 = base.points().map(|(x, _)| x * x).sum::<f64>() / n;
    let raw: Vec<Vec<f64>> = vec![
        base.points().flat_map(|(x, y)| [x, -y]).collect(),
        base.points().flat_map(|(x, _)| [0.0, x * x - mean_x2]).collect(),
        base.points().flat_map(|(_, y)| [y, 0.0]).collect(),
    ];
    let mut modes: Vec<Vec<f64>> = Vec::new();
    for mut v in raw {
        for m in &modes {
            let d: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(m).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        modes.push(v);
    }
    modes
}

fn render(shape: &Shape, face_scale: f64, size: usize, noise: f64, rng: &mut ChaCha8Rng) -> Image {
    let n_fp = shape.n_fp();
    let s = size as f64;
    let mut canvas: Vec<f64> = (0..size * size)
        .map(|k| {
            let (x, y) = ((k % size) as f64, (k / size) as f64);
            30.0 + 60.0 * x / s + 30.0 * y / s
        })
        .collect();
    let sigma = BLOB_SIGMA * face_scale;
    let reach = (3.5 * sigma).ceil() as i64;
    for (l, (cx, cy)) in shape.points().enumerate() {
        // Distinct amplitudes spread over [35, 110], alternating in sign.
        let level = 35.0 + 75.0 * ((l * 11) % n_fp) as f64 / n_fp as f64;
        let amp = if l % 2 == 0 { level } else { -0.6 * level };
        let (x0, y0) = (cx.round() as i64, cy.round() as i64);
        for y in (y0 - reach).max(0)..=(y0 + reach).min(size as i64 - 1) {
            for x in (x0 - reach).max(0)..=(x0 + reach).min(size as i64 - 1) {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                canvas[y as usize * size + x as usize] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite sigma");
    Image::from_fn(size, size, |x, y| {
        let n = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
        (canvas[y * size + x] + n).round().clamp(0.0, 255.0) as u8
    })
}

/// Generates `config.count` samples in memory. Each sample's face box is the
/// bounding box of its landmarks.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<LoadedSample>> {
    config.validate()?;
    let base = base_shape(config.n_fp)?;
    let modes = deformation_modes(&base);
    let size = config.image_size as f64;
    (0..config.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let coeff_dist = Normal::new(0.0, config.mode_sigma).expect("finite sigma");
            let mut coords = base.coords().to_vec();
            for m in &modes {
                let c = if config.mode_sigma > 0.0 { coeff_dist.sample(&mut rng) } else { 0.0 };
                coords.iter_mut().zip(m).for_each(|(v, d)| *v += c * d);
            }
            let deformed = Shape::new(coords)?;

            let (lo, hi) = config.scale_range;
            let pose_scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let face_scale = FACE_FRACTION * size * pose_scale;
            let max_rot = config.max_rotation_deg.to_radians();
            let angle = if max_rot > 0.0 { rng.random_range(-max_rot..=max_rot) } else { 0.0 };
            let margin = (size / 2.0 - 1.1 * face_scale - 2.0).max(0.0);
            let (cx, cy) = if config.jitter_translation && margin > 0.0 {
                (
                    size / 2.0 + rng.random_range(-margin..=margin),
                    size / 2.0 + rng.random_range(-margin..=margin),
                )
            } else {
                (size / 2.0, size / 2.0)
            };
            let pose = SimilarityTransform::from_scale_rotation(face_scale, angle, cx, cy);
            let shape = pose.apply(&deformed);
            let image = render(&shape, face_scale, config.image_size, config.noise_sigma, &mut rng);
            Ok(LoadedSample {
                image,
                face_box: Some(shape.bounding_box()),
                shape,
            })
        })
        .collect()
}

/// Generates a dataset and writes `face_NNNNN.pgm` / `face_NNNNN.lmk` pairs into `out_dir`.
pub fn generate_synthetic_dataset(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Vec<DatasetEntry>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| EsrError::io(out_dir, e))?;
    let samples = generate_synthetic(config)?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let stem: PathBuf = out_dir.join(format!("face_{i:05}"));
            let image_path = stem.with_extension(IMAGE_EXTENSION);
            let landmark_path = stem.with_extension(LANDMARK_EXTENSION);
            save_pgm(&s.image, &image_path)?;
            save_landmarks(&landmark_path, &s.shape, s.face_box.as_ref())?;
            Ok(DatasetEntry {
                image_path,
                landmark_path,
            })
        })
        .collect()
}
