//! Correlation-based selection of pixel-difference features.
//!
//! For each fern feature the residual targets are projected onto a random
//! Gaussian direction, and the pixel pair `(m, n)` whose difference
//! `rho_m - rho_n` correlates best with that projection is picked. The
//! correlation of a difference column is assembled from
//!
//! * `cov(y, rho_j)` for every pixel, one `O(N P)` pass per projection, and
//! * the pixel-pixel covariance matrix, computed once per stage,
//!
//! so the `P^2` candidate scan never touches the `N` sample rows.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{EsrError, Result};
use crate::features::PixelFeatureMatrix;
use crate::matrix::TargetMatrix;

/// Relative cutoff under which a variance is treated as zero.
const VARIANCE_EPS: f64 = 1e-12;

/// Sample covariance (divide by `N - 1`) between every pair of pixel columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCache {
    pixel_cov: Vec<f64>,
    pixel_means: Vec<f64>,
    sample_count: usize,
    p: usize,
}

impl CovarianceCache {
    #[inline]
    pub fn cov(&self, m: usize, n: usize) -> f64 {
        self.pixel_cov[m * self.p + n]
    }

    pub fn means(&self) -> &[f64] {
        &self.pixel_means
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn n_pixels(&self) -> usize {
        self.p
    }

    /// `var(rho_m - rho_n)` from the cached covariances.
    #[inline]
    pub fn difference_variance(&self, m: usize, n: usize) -> f64 {
        self.cov(m, m) + self.cov(n, n) - 2.0 * self.cov(m, n)
    }
}

pub fn precompute_pixel_covariance(rho: &PixelFeatureMatrix) -> Result<CovarianceCache> {
    let (n, p) = (rho.n_samples(), rho.n_pixels());
    if n < 2 {
        return Err(EsrError::InvalidParameter(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mut means = vec![0.0; p];
    for row in rho.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    // Centered columns, stored contiguously for the dot products below.
    let mut centered = vec![0.0; n * p];
    for (i, row) in rho.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            centered[j * n + i] = v - means[j];
        }
    }
    let denom = (n - 1) as f64;
    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|m| {
            let cm = &centered[m * n..(m + 1) * n];
            (m..p)
                .map(|k| {
                    let ck = &centered[k * n..(k + 1) * n];
                    cm.iter().zip(ck).map(|(a, b)| a * b).sum::<f64>() / denom
                })
                .collect()
        })
        .collect();
    let mut pixel_cov = vec![0.0; p * p];
    for (m, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let k = m + off;
            pixel_cov[m * p + k] = v;
            pixel_cov[k * p + m] = v;
        }
    }
    Ok(CovarianceCache {
        pixel_cov,
        pixel_means: means,
        sample_count: n,
        p,
    })
}

/// Targets projected onto one random direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedTarget {
    values: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl ProjectedTarget {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(EsrError::InvalidParameter(format!(
                "projection needs at least 2 samples, got {n}"
            )));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(ProjectedTarget {
            values,
            mean,
            variance,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    fn is_constant(&self) -> bool {
        let scale = self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64;
        !(self.variance > VARIANCE_EPS * VARIANCE_EPS * scale) || self.variance == 0.0
    }
}

/// `y . v` for a direction `v` drawn from the unit Gaussian.
pub fn project_targets<R: Rng + ?Sized>(y: &TargetMatrix, rng: &mut R) -> Result<ProjectedTarget> {
    let direction: Vec<f64> = (0..y.n_cols()).map(|_| rng.sample(StandardNormal)).collect();
    project_onto(y, &direction)
}

pub fn project_onto(y: &TargetMatrix, direction: &[f64]) -> Result<ProjectedTarget> {
    if direction.len() != y.n_cols() {
        return Err(EsrError::InvalidParameter(format!(
            "direction of length {} for {} target columns",
            direction.len(),
            y.n_cols()
        )));
    }
    ProjectedTarget::from_values(
        y.rows()
            .map(|r| r.iter().zip(direction).map(|(a, b)| a * b).sum())
            .collect(),
    )
}

/// `cov(y_proj, rho_j)` for every pixel column: a single pass over `rho`.
/// Adds the number of intensity reads performed to `reads`.
pub fn target_pixel_covariance(
    proj: &ProjectedTarget,
    rho: &PixelFeatureMatrix,
    cache: &CovarianceCache,
    reads: &mut usize,
) -> Vec<f64> {
    let p = rho.n_pixels();
    let mut acc = vec![0.0; p];
    for (row, &y) in rho.rows().zip(proj.values()) {
        let yc = y - proj.mean;
        for ((a, v), mu) in acc.iter_mut().zip(row).zip(cache.means()) {
            *a += yc * (v - mu);
        }
        *reads += row.len();
    }
    let denom = (rho.n_samples() - 1) as f64;
    acc.iter_mut().for_each(|a| *a /= denom);
    acc
}

/// Pearson correlation of the projection with `rho_m - rho_n`, from cached
/// covariances. `None` when either side has zero variance.
pub fn correlation_with_difference(
    proj: &ProjectedTarget,
    cache: &CovarianceCache,
    target_pixel_cov: &[f64],
    m: usize,
    n: usize,
) -> Option<f64> {
    if m == n || proj.is_constant() {
        return None;
    }
    correlation_unchecked(proj.variance, cache, target_pixel_cov, m, n)
}

#[inline]
fn correlation_unchecked(
    target_variance: f64,
    cache: &CovarianceCache,
    target_pixel_cov: &[f64],
    m: usize,
    n: usize,
) -> Option<f64> {
    let var_diff = cache.difference_variance(m, n);
    let scale = cache.cov(m, m) + cache.cov(n, n);
    if !(var_diff > VARIANCE_EPS * scale) {
        return None;
    }
    Some((target_pixel_cov[m] - target_pixel_cov[n]) / (target_variance * var_diff).sqrt())
}

/// Best `(m, n)` for one projection, scanning `m` then `n` ascending and
/// keeping only strict improvements, so the smallest pair wins ties.
fn best_pair(
    target_variance: f64,
    cache: &CovarianceCache,
    target_pixel_cov: &[f64],
) -> Option<(usize, usize, f64)> {
    let p = cache.n_pixels();
    let per_m: Vec<Option<(usize, usize, f64)>> = (0..p)
        .into_par_iter()
        .map(|m| {
            let mut best: Option<(usize, usize, f64)> = None;
            for n in (0..p).filter(|&n| n != m) {
                if let Some(c) = correlation_unchecked(target_variance, cache, target_pixel_cov, m, n) {
                    if best.is_none_or(|(_, _, b)| c > b) {
                        best = Some((m, n, c));
                    }
                }
            }
            best
        })
        .collect();
    per_m.into_iter().flatten().fold(None, |best, cand| match best {
        Some((_, _, b)) if cand.2 <= b => best,
        _ => Some(cand),
    })
}

/// Work counters from one call to [`select_features_instrumented`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionStats {
    pub rounds: usize,
    /// Intensity values read from `rho`, summed over all rounds.
    pub rho_reads: usize,
    /// Candidate pairs evaluated through the covariance cache.
    pub candidates: usize,
}

/// Picks `f` pixel pairs, one per fresh random projection of `y`.
pub fn select_features<R: Rng + ?Sized>(
    y: &TargetMatrix,
    rho: &PixelFeatureMatrix,
    cache: &CovarianceCache,
    f: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    select_features_instrumented(y, rho, cache, f, rng).map(|(pairs, _)| pairs)
}

pub fn select_features_instrumented<R: Rng + ?Sized>(
    y: &TargetMatrix,
    rho: &PixelFeatureMatrix,
    cache: &CovarianceCache,
    f: usize,
    rng: &mut R,
) -> Result<(Vec<(usize, usize)>, SelectionStats)> {
    let p = rho.n_pixels();
    if p < 2 {
        return Err(EsrError::InvalidParameter(format!(
            "selection needs at least 2 pixels, got {p}"
        )));
    }
    if f == 0 {
        return Err(EsrError::InvalidParameter("fern depth must be >= 1".into()));
    }
    if y.n_rows() != rho.n_samples() || cache.n_pixels() != p {
        return Err(EsrError::InvalidParameter(
            "targets, pixels and covariance cache disagree on dimensions".into(),
        ));
    }
    let mut stats = SelectionStats::default();
    let mut pairs = Vec::with_capacity(f);
    for _ in 0..f {
        let proj = project_targets(y, rng)?;
        if proj.is_constant() {
            return Err(EsrError::NoValidCandidate);
        }
        let tpc = target_pixel_covariance(&proj, rho, cache, &mut stats.rho_reads);
        stats.candidates += p * (p - 1);
        stats.rounds += 1;
        let (m, n, _) = best_pair(proj.variance, cache, &tpc).ok_or(EsrError::NoValidCandidate)?;
        pairs.push((m, n));
    }
    Ok((pairs, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{pixel_difference_feature, LocalCoordinate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coords(p: usize) -> Vec<LocalCoordinate> {
        vec![LocalCoordinate { landmark: 0, dx: 0.0, dy: 0.0 }; p]
    }

    fn random_rho(rng: &mut impl Rng, n: usize, p: usize) -> PixelFeatureMatrix {
        let rows = (0..n)
            .map(|_| (0..p).map(|_| f64::from(rng.random_range(0..=255u8))).collect())
            .collect();
        PixelFeatureMatrix::from_rows(rows, coords(p)).unwrap()
    }

    fn two_pass_cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    }

    fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
        let vb = two_pass_cov(b, b);
        let va = two_pass_cov(a, a);
        (vb > 1e-9 && va > 0.0).then(|| two_pass_cov(a, b) / (va * vb).sqrt())
    }

    #[test]
    fn covariance_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_rho(&mut rng, 10, 5);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        for m in 0..5 {
            for n in 0..5 {
                let direct = two_pass_cov(&rho.column(m), &rho.column(n));
                assert!((cache.cov(m, n) - direct).abs() < 1e-9);
                assert_eq!(cache.cov(m, n), cache.cov(n, m));
            }
            assert!(cache.cov(m, m) >= 0.0);
        }
    }

    #[test]
    fn covariance_constant_column_and_small_n() {
        let rho = PixelFeatureMatrix::from_rows(
            vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![4.0, 5.0]],
            coords(2),
        )
        .unwrap();
        let cache = precompute_pixel_covariance(&rho).unwrap();
        assert_eq!(cache.cov(1, 1), 0.0);
        assert_eq!(cache.cov(0, 1), 0.0);
        let one = PixelFeatureMatrix::from_rows(vec![vec![1.0, 2.0]], coords(2)).unwrap();
        assert!(precompute_pixel_covariance(&one).is_err());
    }

    #[test]
    fn projection_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = TargetMatrix::zeros(4, 6);
        let p = project_targets(&zero, &mut rng).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert_eq!(p.variance(), 0.0);

        let mut y = TargetMatrix::zeros(3, 4);
        for (i, v) in [1.0, -2.0, 5.0].into_iter().enumerate() {
            y.row_mut(i)[2] = v;
        }
        let dir = [0.3, -1.1, 0.7, 2.0];
        let p = project_onto(&y, &dir).unwrap();
        assert_eq!(p.values(), &[0.7, -1.4, 3.5]);

        let a = project_targets(&y, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = project_targets(&y, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_correlation_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_rho(&mut rng, 40, 4);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let proj = ProjectedTarget::from_values(pixel_difference_feature(&rho, 1, 3).unwrap()).unwrap();
        let tpc = target_pixel_covariance(&proj, &rho, &cache, &mut 0);
        let c = correlation_with_difference(&proj, &cache, &tpc, 1, 3).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
        assert!(correlation_with_difference(&proj, &cache, &tpc, 2, 2).is_none());
    }

    #[test]
    fn identical_columns_are_invalid() {
        let rho = PixelFeatureMatrix::from_rows(
            vec![vec![1.0, 1.0, 3.0], vec![4.0, 4.0, 0.0], vec![2.0, 2.0, 2.0]],
            coords(3),
        )
        .unwrap();
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let proj = ProjectedTarget::from_values(vec![1.0, 0.0, 2.0]).unwrap();
        let tpc = target_pixel_covariance(&proj, &rho, &cache, &mut 0);
        assert!(correlation_with_difference(&proj, &cache, &tpc, 0, 1).is_none());
        assert!(correlation_with_difference(&proj, &cache, &tpc, 0, 2).is_some());
    }

    #[test]
    fn fast_correlation_matches_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let rho = random_rho(&mut rng, 50, 8);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let proj = ProjectedTarget::from_values((0..50).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let tpc = target_pixel_covariance(&proj, &rho, &cache, &mut 0);
        for m in 0..8 {
            for n in 0..8 {
                if m == n {
                    continue;
                }
                let d = pixel_difference_feature(&rho, m, n).unwrap();
                let direct = pearson(proj.values(), &d).unwrap();
                let fast = correlation_with_difference(&proj, &cache, &tpc, m, n).unwrap();
                assert!((direct - fast).abs() < 1e-9, "{m},{n}: {direct} vs {fast}");
            }
        }
    }

    #[test]
    fn two_pixels_pick_positive_orientation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_rho(&mut rng, 30, 2);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let mut y = TargetMatrix::zeros(30, 2);
        for i in 0..30 {
            y.row_mut(i).copy_from_slice(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        let seed = 99;
        let pairs = select_features(&y, &rho, &cache, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(seed);
        for &(m, n) in &pairs {
            let proj = project_targets(&y, &mut replay).unwrap();
            let d = pixel_difference_feature(&rho, m, n).unwrap();
            assert!(pearson(proj.values(), &d).unwrap() > 0.0);
            assert!((m, n) == (0, 1) || (m, n) == (1, 0));
        }
    }

    #[test]
    fn zero_targets_fail_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_rho(&mut rng, 20, 5);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let y = TargetMatrix::zeros(20, 4);
        assert!(matches!(
            select_features(&y, &rho, &cache, 2, &mut rng),
            Err(EsrError::NoValidCandidate)
        ));
    }

    #[test]
    fn positive_rescaling_keeps_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_rho(&mut rng, 60, 10);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let values: Vec<f64> = (0..60).map(|_| rng.random_range(-3.0..3.0)).collect();
        let base = ProjectedTarget::from_values(values.clone()).unwrap();
        let tpc = target_pixel_covariance(&base, &rho, &cache, &mut 0);
        let a = best_pair(base.variance(), &cache, &tpc).unwrap();
        for k in [0.01, 3.0, 1e4] {
            let scaled = ProjectedTarget::from_values(values.iter().map(|v| v * k).collect()).unwrap();
            let tpc = target_pixel_covariance(&scaled, &rho, &cache, &mut 0);
            let b = best_pair(scaled.variance(), &cache, &tpc).unwrap();
            assert_eq!((a.0, a.1), (b.0, b.1));
        }
    }

    #[test]
    fn reads_are_linear_in_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, p, f) = (40, 24, 5);
        let rho = random_rho(&mut rng, n, p);
        let cache = precompute_pixel_covariance(&rho).unwrap();
        let mut y = TargetMatrix::zeros(n, 6);
        for i in 0..n {
            for v in y.row_mut(i) {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let (_, stats) = select_features_instrumented(&y, &rho, &cache, f, &mut rng).unwrap();
        assert_eq!(stats.rounds, f);
        assert_eq!(stats.rho_reads, f * n * p);
        assert_eq!(stats.candidates, f * p * (p - 1));
    }
}
