//! Model files.
//!
//! A model is stored as line-oriented text. Every real number is written in
//! scientific notation with 17 significant digits, which reproduces binary64
//! values exactly on reading.
//!
//! ```text
//! esr-model
//! format_version 1
//! n_fp <N>
//! params n_aug=<..> t_stages=<..> k_ferns=<..> p_pixels=<..> f_features=<..> kappa=<..> beta=<..> seed=<..>
//! mean_shape <2N reals>
//! init_shapes <count>
//! shape <2N reals>                      (count lines)
//! stages <T>
//! stage <t> coords <P> ferns <K>
//! coord <landmark> <dx> <dy>            (P lines)
//! fern
//! pairs <m n>*F
//! thresholds <F reals>
//! bin <2N reals>                        (2^F lines)
//! end
//! ```
//!
//! Landmark and pixel indices are zero-based.

use std::fs;
use std::path::Path;

use crate::cascade::{EsrModel, InitSet, StageRegressor, TrainParams};
use crate::error::{EsrError, Result};
use crate::features::LocalCoordinate;
use crate::fern::Fern;
use crate::geometry::Shape;

const MAGIC: &str = "esr-model";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(values: &[f64]) -> String {
    values.iter().map(|&v| real(v)).collect::<Vec<_>>().join(" ")
}

pub fn format_model(model: &EsrModel) -> String {
    let p = &model.params;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(MAGIC.to_string());
    line(format!("format_version {}", model.format_version));
    line(format!("n_fp {}", model.n_fp));
    line(format!(
        "params n_aug={} t_stages={} k_ferns={} p_pixels={} f_features={} kappa={} beta={} seed={}",
        p.n_aug,
        p.t_stages,
        p.k_ferns,
        p.p_pixels,
        p.f_features,
        real(p.kappa),
        real(p.beta),
        p.seed
    ));
    line(format!("mean_shape {}", reals(model.mean_shape.coords())));
    line(format!("init_shapes {}", model.init_set.len()));
    for s in model.init_set.shapes() {
        line(format!("shape {}", reals(s.coords())));
    }
    line(format!("stages {}", model.stages.len()));
    for (t, stage) in model.stages.iter().enumerate() {
        line(format!(
            "stage {t} coords {} ferns {}",
            stage.local_coords().len(),
            stage.ferns().len()
        ));
        for c in stage.local_coords() {
            line(format!("coord {} {} {}", c.landmark, real(c.dx), real(c.dy)));
        }
        for fern in stage.ferns() {
            line("fern".into());
            let pairs: Vec<String> = fern.pairs().iter().map(|(m, n)| format!("{m} {n}")).collect();
            line(format!("pairs {}", pairs.join(" ")));
            line(format!("thresholds {}", reals(fern.thresholds())));
            for b in fern.bin_outputs() {
                line(format!("bin {}", reals(b)));
            }
        }
    }
    line("end".into());
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

type ParseResult<T> = std::result::Result<T, String>;

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    /// Next non-blank line, split into its keyword and remaining fields.
    fn expect(&mut self, keyword: &str) -> ParseResult<Vec<&'a str>> {
        loop {
            let (i, line) = self
                .inner
                .next()
                .ok_or_else(|| format!("unexpected end of file, expected `{keyword}`"))?;
            self.last = i + 1;
            let mut fields = line.split_whitespace();
            match fields.next() {
                None => continue,
                Some(k) if k == keyword => return Ok(fields.collect()),
                Some(k) => return Err(format!("line {}: expected `{keyword}`, found `{k}`", self.last)),
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> String {
        format!("line {}: {msg}", self.last)
    }

    fn single<T: std::str::FromStr>(&mut self, keyword: &str) -> ParseResult<T> {
        let fields = self.expect(keyword)?;
        match fields.as_slice() {
            [v] => v.parse().map_err(|_| self.err(format!("bad value {v:?}"))),
            _ => Err(self.err(format!("`{keyword}` takes one value"))),
        }
    }

    fn reals(&mut self, keyword: &str, count: usize) -> ParseResult<Vec<f64>> {
        let fields = self.expect(keyword)?;
        if fields.len() != count {
            return Err(self.err(format!("`{keyword}` needs {count} values, found {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| !v.is_nan())
                    .ok_or_else(|| self.err(format!("bad number {f:?}")))
            })
            .collect()
    }
}

fn parse_params(fields: &[&str], lines: &Lines) -> ParseResult<TrainParams> {
    let mut p = TrainParams::default();
    let mut seen = Vec::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| lines.err(format!("expected key=value, found {field:?}")))?;
        let bad = || lines.err(format!("bad value for {key}: {value:?}"));
        match key {
            "n_aug" => p.n_aug = value.parse().map_err(|_| bad())?,
            "t_stages" => p.t_stages = value.parse().map_err(|_| bad())?,
            "k_ferns" => p.k_ferns = value.parse().map_err(|_| bad())?,
            "p_pixels" => p.p_pixels = value.parse().map_err(|_| bad())?,
            "f_features" => p.f_features = value.parse().map_err(|_| bad())?,
            "kappa" => p.kappa = value.parse().map_err(|_| bad())?,
            "beta" => p.beta = value.parse().map_err(|_| bad())?,
            "seed" => p.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(lines.err(format!("unknown parameter {key}"))),
        }
        seen.push(key);
    }
    for key in ["n_aug", "t_stages", "k_ferns", "p_pixels", "f_features", "kappa", "beta", "seed"] {
        if !seen.contains(&key) {
            return Err(lines.err(format!("missing parameter {key}")));
        }
    }
    Ok(p)
}

pub fn parse_model(text: &str) -> ParseResult<EsrModel> {
    let mut lines = Lines::new(text);
    lines.expect(MAGIC)?;
    let format_version: u32 = lines.single("format_version")?;
    if format_version != crate::cascade::MODEL_FORMAT_VERSION {
        return Err(lines.err(format!("unsupported format_version {format_version}")));
    }
    let n_fp: usize = lines.single("n_fp")?;
    if !(2..=1_000_000).contains(&n_fp) {
        return Err(lines.err(format!("implausible n_fp {n_fp}")));
    }
    let dim = 2 * n_fp;
    let fields = lines.expect("params")?;
    let params = parse_params(&fields, &lines)?;
    params.validate().map_err(|e| lines.err(e))?;

    let shape = |v: Vec<f64>, lines: &Lines| Shape::new(v).map_err(|e| lines.err(e));
    let mean_shape = shape(lines.reals("mean_shape", dim)?, &lines)?;
    let n_init: usize = lines.single("init_shapes")?;
    let mut init = Vec::new();
    for _ in 0..n_init {
        init.push(shape(lines.reals("shape", dim)?, &lines)?);
    }
    let init_set = InitSet::new(init).map_err(|e| lines.err(e))?;

    let n_stages: usize = lines.single("stages")?;
    if n_stages != params.t_stages {
        return Err(lines.err(format!(
            "{n_stages} stages but params declare t_stages={}",
            params.t_stages
        )));
    }
    let f = params.f_features;
    let mut stages = Vec::with_capacity(n_stages);
    for t in 0..n_stages {
        let header = lines.expect("stage")?;
        let (p, k) = match header.as_slice() {
            [idx, "coords", p, "ferns", k] if idx.parse() == Ok(t) => (
                p.parse::<usize>().map_err(|_| lines.err("bad coordinate count"))?,
                k.parse::<usize>().map_err(|_| lines.err("bad fern count"))?,
            ),
            _ => return Err(lines.err(format!("malformed header for stage {t}"))),
        };
        if p != params.p_pixels || k != params.k_ferns {
            return Err(lines.err(format!(
                "stage {t} has {p} coords / {k} ferns, params declare {} / {}",
                params.p_pixels, params.k_ferns
            )));
        }
        let mut coords = Vec::with_capacity(p);
        for _ in 0..p {
            let fields = lines.expect("coord")?;
            let [l, dx, dy] = fields.as_slice() else {
                return Err(lines.err("`coord` takes landmark dx dy"));
            };
            let landmark: usize = l.parse().map_err(|_| lines.err("bad landmark index"))?;
            if landmark >= n_fp {
                return Err(lines.err(format!("landmark {landmark} out of range")));
            }
            let dx: f64 = dx.parse().map_err(|_| lines.err("bad dx"))?;
            let dy: f64 = dy.parse().map_err(|_| lines.err("bad dy"))?;
            coords.push(LocalCoordinate { landmark, dx, dy });
        }
        let mut ferns = Vec::with_capacity(k);
        for _ in 0..k {
            lines.expect("fern")?;
            let fields = lines.expect("pairs")?;
            if fields.len() != 2 * f {
                return Err(lines.err(format!("`pairs` needs {} indices", 2 * f)));
            }
            let idx = fields
                .iter()
                .map(|v| v.parse::<usize>().map_err(|_| lines.err(format!("bad index {v:?}"))))
                .collect::<ParseResult<Vec<_>>>()?;
            let pairs: Vec<(usize, usize)> = idx.chunks_exact(2).map(|c| (c[0], c[1])).collect();
            let thresholds = lines.reals("thresholds", f)?;
            let mut bins = Vec::with_capacity(1 << f);
            for _ in 0..1 << f {
                bins.push(lines.reals("bin", dim)?);
            }
            ferns.push(Fern::new(pairs, thresholds, bins).map_err(|e| lines.err(e))?);
        }
        stages.push(StageRegressor::new(coords, ferns).map_err(|e| lines.err(e))?);
    }
    lines.expect("end")?;

    let model = EsrModel {
        format_version,
        n_fp,
        mean_shape,
        params,
        stages,
        init_set,
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

pub fn save_model(model: &EsrModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_model(model)).map_err(|e| EsrError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EsrModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EsrError::io(path, e))?;
    parse_model(&text).map_err(|m| EsrError::format(path, m))
}
