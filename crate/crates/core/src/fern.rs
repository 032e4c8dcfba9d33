//! Random ferns: the primitive regressors of each cascade stage.
//!
//! A fern thresholds `F` pixel-difference features and uses the resulting bits
//! as an index into `2^F` bins. Each bin stores a shrunken average of the
//! regression targets that fell into it during training.

use rand::Rng;

use crate::error::{EsrError, Result};
use crate::matrix::TargetMatrix;

/// Largest supported fern depth; keeps the bin table at most 65536 entries.
pub const MAX_FERN_FEATURES: usize = 16;

/// Bin-output shrinkage strength `beta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shrinkage(f64);

impl Shrinkage {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || beta.is_nan() {
            return Err(EsrError::InvalidParameter(format!(
                "shrinkage beta must be >= 0, got {beta}"
            )));
        }
        Ok(Shrinkage(beta))
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    /// `1 / (1 + beta / count)`; zero for an empty bin.
    pub fn factor(self, count: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            1.0 / (1.0 + self.0 / count as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fern {
    pairs: Vec<(usize, usize)>,
    thresholds: Vec<f64>,
    bin_outputs: Vec<Vec<f64>>,
}

impl Fern {
    pub fn new(
        pairs: Vec<(usize, usize)>,
        thresholds: Vec<f64>,
        bin_outputs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let f = pairs.len();
        if f == 0 || f > MAX_FERN_FEATURES {
            return Err(EsrError::InvalidParameter(format!(
                "fern depth {f} outside 1..={MAX_FERN_FEATURES}"
            )));
        }
        if thresholds.len() != f {
            return Err(EsrError::InvalidParameter(format!(
                "{} thresholds for {f} features",
                thresholds.len()
            )));
        }
        if bin_outputs.len() != 1 << f {
            return Err(EsrError::InvalidParameter(format!(
                "{} bin outputs for {f} features",
                bin_outputs.len()
            )));
        }
        let dim = bin_outputs[0].len();
        if bin_outputs.iter().any(|b| b.len() != dim) {
            return Err(EsrError::InvalidParameter("ragged bin outputs".into()));
        }
        if bin_outputs.iter().flatten().any(|v| !v.is_finite())
            || thresholds.iter().any(|t| t.is_nan())
        {
            return Err(EsrError::InvalidParameter("non-finite fern parameter".into()));
        }
        Ok(Fern {
            pairs,
            thresholds,
            bin_outputs,
        })
    }

    /// A fern whose every bin outputs the zero vector.
    pub fn zero(f: usize, dim: usize) -> Self {
        Fern {
            pairs: vec![(0, 1); f],
            thresholds: vec![0.0; f],
            bin_outputs: vec![vec![0.0; dim]; 1 << f],
        }
    }

    pub fn depth(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn bin_outputs(&self) -> &[Vec<f64>] {
        &self.bin_outputs
    }

    pub fn output_dim(&self) -> usize {
        self.bin_outputs[0].len()
    }

    /// Bin reached by a row of shape-indexed intensities.
    #[inline]
    pub fn bin_for_pixels(&self, pixels: &[f64]) -> usize {
        self.pairs
            .iter()
            .zip(&self.thresholds)
            .enumerate()
            .fold(0, |acc, (f, (&(m, n), &t))| {
                acc | (usize::from(pixels[m] - pixels[n] >= t) << f)
            })
    }

    /// Output for precomputed difference features in pair order.
    pub fn apply(&self, features: &[f64]) -> Result<&[f64]> {
        Ok(&self.bin_outputs[bin_index(features, &self.thresholds)?])
    }
}

/// Bit `f` is set iff `features[f] >= thresholds[f]`.
pub fn bin_index(features: &[f64], thresholds: &[f64]) -> Result<usize> {
    if features.len() != thresholds.len() {
        return Err(EsrError::InvalidParameter(format!(
            "{} features for {} thresholds",
            features.len(),
            thresholds.len()
        )));
    }
    if features.len() > MAX_FERN_FEATURES {
        return Err(EsrError::InvalidParameter(format!(
            "fern depth {} exceeds {MAX_FERN_FEATURES}",
            features.len()
        )));
    }
    Ok(features
        .iter()
        .zip(thresholds)
        .enumerate()
        .fold(0, |acc, (f, (x, t))| acc | (usize::from(x >= t) << f)))
}

pub fn apply_fern<'a>(fern: &'a Fern, features: &[f64]) -> Result<&'a [f64]> {
    fern.apply(features)
}

/// Per-bin shrunken means of `targets`. Empty bins get the zero vector.
pub fn compute_bin_outputs(
    targets: &TargetMatrix,
    assignments: &[usize],
    n_bins: usize,
    shrinkage: Shrinkage,
) -> Result<Vec<Vec<f64>>> {
    if assignments.len() != targets.n_rows() {
        return Err(EsrError::InvalidParameter(format!(
            "{} assignments for {} targets",
            assignments.len(),
            targets.n_rows()
        )));
    }
    let dim = targets.n_cols();
    let mut sums = vec![vec![0.0; dim]; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (row, &b) in targets.rows().zip(assignments) {
        if b >= n_bins {
            return Err(EsrError::InvalidParameter(format!(
                "bin {b} out of range for {n_bins} bins"
            )));
        }
        counts[b] += 1;
        for (s, v) in sums[b].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count == 0 {
            continue;
        }
        let factor = shrinkage.factor(count);
        for s in sum.iter_mut() {
            *s = (*s / count as f64) * factor;
        }
    }
    Ok(sums)
}

/// Checks that every bin output lies in the coordinate-wise hull of its
/// targets, scaled by that bin's shrinkage factor.
pub fn check_bin_span(
    targets: &TargetMatrix,
    assignments: &[usize],
    outputs: &[Vec<f64>],
    shrinkage: Shrinkage,
) -> Result<()> {
    let dim = targets.n_cols();
    let mut lo = vec![vec![f64::INFINITY; dim]; outputs.len()];
    let mut hi = vec![vec![f64::NEG_INFINITY; dim]; outputs.len()];
    let mut counts = vec![0usize; outputs.len()];
    for (row, &b) in targets.rows().zip(assignments) {
        counts[b] += 1;
        for (d, &v) in row.iter().enumerate() {
            lo[b][d] = lo[b][d].min(v);
            hi[b][d] = hi[b][d].max(v);
        }
    }
    for (b, out) in outputs.iter().enumerate() {
        if counts[b] == 0 {
            if out.iter().any(|&v| v != 0.0) {
                return Err(EsrError::InvariantViolation(format!(
                    "empty bin {b} has a nonzero output"
                )));
            }
            continue;
        }
        let factor = shrinkage.factor(counts[b]);
        for (d, &v) in out.iter().enumerate() {
            let (a, c) = (lo[b][d] * factor, hi[b][d] * factor);
            let slack = 1e-12 * (a.abs().max(c.abs()) + f64::MIN_POSITIVE);
            if v < a - slack || v > c + slack {
                return Err(EsrError::InvariantViolation(format!(
                    "bin {b} output {v} outside scaled target range [{a}, {c}]"
                )));
            }
        }
    }
    Ok(())
}

/// Largest absolute feature value, the `c` of the threshold range.
pub fn feature_range<'a>(features: impl IntoIterator<Item = &'a f64>) -> f64 {
    features.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `f` thresholds drawn uniformly from `[-0.2 c, 0.2 c]`.
pub fn sample_thresholds<R: Rng + ?Sized>(c: f64, f: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(EsrError::DegenerateFeature);
    }
    let half = 0.2 * c;
    Ok((0..f).map(|_| rng.random_range(-half..=half)).collect())
}
