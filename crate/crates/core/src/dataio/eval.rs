//! Alignment error and evaluation reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{predict, EsrModel, TestParams};
use crate::dataio::landmarks::{format_significant, LoadedSample};
use crate::error::{EsrError, Result};
use crate::geometry::Shape;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Landmark pair (zero-based) whose ground-truth distance normalizes the
    /// error; `None` reports errors in pixels.
    pub normalizer: Option<(usize, usize)>,
    /// Thresholds of the cumulative error curve. `f64::INFINITY` is allowed.
    pub thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let mut thresholds: Vec<f64> = (0..=50).map(|k| k as f64 * 0.005).collect();
        thresholds.push(f64::INFINITY);
        EvalConfig {
            normalizer: Some((0, 1)),
            thresholds,
        }
    }
}

/// `||S - S_hat|| / (N_fp * d)` with `d` the ground-truth distance between the
/// normalizer landmarks, or 1 without normalization.
pub fn alignment_error(predicted: &Shape, truth: &Shape, normalizer: Option<(usize, usize)>) -> Result<f64> {
    let diff = predicted.difference(truth)?;
    let d = match normalizer {
        None => 1.0,
        Some((a, b)) => {
            let (xa, ya) = truth.landmark(a)?;
            let (xb, yb) = truth.landmark(b)?;
            let d = (xa - xb).hypot(ya - yb);
            if !(d > 0.0) {
                return Err(EsrError::InvalidParameter(format!(
                    "normalizer landmarks {a} and {b} coincide"
                )));
            }
            d
        }
    };
    Ok(diff.norm() / (truth.n_fp() as f64 * d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub normalizer: Option<(usize, usize)>,
    /// Per-image error under the configured normalization.
    pub errors: Vec<f64>,
    /// Per-image error in pixels (no normalization).
    pub raw_errors: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub raw_mean: f64,
    pub raw_median: f64,
    /// `(tau, fraction of images with error < tau)`.
    pub curve: Vec<(f64, f64)>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Builds a report from predicted and ground-truth shapes.
pub fn evaluate_shapes(predicted: &[Shape], truths: &[Shape], config: &EvalConfig) -> Result<EvalReport> {
    if predicted.is_empty() {
        return Err(EsrError::EmptyInput("evaluation set"));
    }
    if predicted.len() != truths.len() {
        return Err(EsrError::InvalidParameter(format!(
            "{} predictions for {} ground-truth shapes",
            predicted.len(),
            truths.len()
        )));
    }
    let errors = predicted
        .iter()
        .zip(truths)
        .map(|(p, t)| alignment_error(p, t, config.normalizer))
        .collect::<Result<Vec<_>>>()?;
    let raw_errors = predicted
        .iter()
        .zip(truths)
        .map(|(p, t)| alignment_error(p, t, None))
        .collect::<Result<Vec<_>>>()?;
    let n = errors.len() as f64;
    let curve = config
        .thresholds
        .iter()
        .map(|&tau| (tau, errors.iter().filter(|&&e| e < tau).count() as f64 / n))
        .collect();
    Ok(EvalReport {
        normalizer: config.normalizer,
        mean: mean(&errors),
        median: median(&errors),
        raw_mean: mean(&raw_errors),
        raw_median: median(&raw_errors),
        errors,
        raw_errors,
        curve,
    })
}

/// Predicts every sample; sample `i` uses RNG stream `i` of `seed`.
pub fn predict_all(
    model: &EsrModel,
    samples: &[LoadedSample],
    test_params: &TestParams,
    seed: u64,
) -> Result<Vec<Shape>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            predict(model, &s.image, s.face_box.as_ref(), test_params, &model.init_set, &mut rng)
        })
        .collect()
}

pub fn evaluate(
    model: &EsrModel,
    samples: &[LoadedSample],
    test_params: &TestParams,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvalReport> {
    let predicted = predict_all(model, samples, test_params, seed)?;
    let truths: Vec<Shape> = samples.iter().map(|s| s.shape.clone()).collect();
    evaluate_shapes(&predicted, &truths, config)
}

/// Report of the mean shape placed in each sample's face box, before any regression.
pub fn evaluate_mean_shape_baseline(
    model: &EsrModel,
    samples: &[LoadedSample],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let predicted: Vec<Shape> = samples
        .iter()
        .map(|s| {
            let b = s.face_box.unwrap_or_else(|| {
                crate::geometry::BoundingBox::new(0.0, 0.0, s.image.width() as f64, s.image.height() as f64)
            });
            model.mean_shape_in_box(&b)
        })
        .collect();
    let truths: Vec<Shape> = samples.iter().map(|s| s.shape.clone()).collect();
    evaluate_shapes(&predicted, &truths, config)
}

/// `key=value` text rendering of a report.
pub fn format_report(report: &EvalReport) -> String {
    let f = |v: f64| {
        if v.is_infinite() {
            "inf".to_string()
        } else {
            format_significant(v, 9)
        }
    };
    let mut out = String::new();
    out.push_str(&format!("images={}\n", report.errors.len()));
    match report.normalizer {
        Some((a, b)) => out.push_str(&format!("normalizer={a},{b}\n")),
        None => out.push_str("normalizer=none\n"),
    }
    out.push_str(&format!("mean_error={}\n", f(report.mean)));
    out.push_str(&format!("median_error={}\n", f(report.median)));
    out.push_str(&format!("mean_raw_error={}\n", f(report.raw_mean)));
    out.push_str(&format!("median_raw_error={}\n", f(report.raw_median)));
    for (tau, frac) in &report.curve {
        out.push_str(&format!("curve tau={} fraction={}\n", f(*tau), f(*frac)));
    }
    for (i, (e, r)) in report.errors.iter().zip(&report.raw_errors).enumerate() {
        out.push_str(&format!("image={i} error={} raw_error={}\n", f(*e), f(*r)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_error_for_exact_prediction() {
        let s = Shape::new(vec![0.0, 0.0, 3.0, 4.0, 1.0, 9.0]).unwrap();
        assert_eq!(alignment_error(&s, &s, Some((0, 1))).unwrap(), 0.0);
    }

    #[test]
    fn uniform_offset_error() {
        // Every landmark off by (3, 4): norm = 5 sqrt(N), error = 5 / sqrt(N).
        let n = 4;
        let truth = Shape::new((0..2 * n).map(|k| k as f64).collect()).unwrap();
        let pred = Shape::new(
            truth.coords().iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { 3.0 } else { 4.0 }).collect(),
        )
        .unwrap();
        let direct = (0..n).map(|_| 9.0 + 16.0).sum::<f64>().sqrt() / n as f64;
        let e = alignment_error(&pred, &truth, None).unwrap();
        assert!((e - direct).abs() < 1e-12);
        assert!((e - 5.0 / (n as f64).sqrt()).abs() < 1e-12);
        // Landmarks 0 and 1 are sqrt(8) apart.
        let en = alignment_error(&pred, &truth, Some((0, 1))).unwrap();
        assert!((en - direct / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coincident_normalizer_rejected() {
        let s = Shape::new(vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        assert!(alignment_error(&s, &s, Some((0, 1))).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn curve_monotone_and_complete(
            offsets in proptest::collection::vec(0.0f64..5.0, 1..30),
        ) {
            let truths: Vec<Shape> = offsets.iter().map(|_| Shape::new(vec![0.0, 0.0, 10.0, 0.0]).unwrap()).collect();
            let preds: Vec<Shape> = offsets.iter().map(|&o| Shape::new(vec![o, 0.0, 10.0, o]).unwrap()).collect();
            let r = evaluate_shapes(&preds, &truths, &EvalConfig::default()).unwrap();
            for w in r.curve.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            prop_assert!(r.curve.iter().all(|&(_, f)| (0.0..=1.0).contains(&f)));
            prop_assert_eq!(r.curve.last().unwrap().1, 1.0);
        }
    }

    #[test]
    fn report_text_lists_summary() {
        let s = Shape::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let r = evaluate_shapes(std::slice::from_ref(&s), std::slice::from_ref(&s), &EvalConfig::default()).unwrap();
        let text = format_report(&r);
        assert!(text.contains("mean_error=0\n"));
        assert!(text.contains("curve tau=inf fraction=1\n"));
    }
}
