//! Two-level boosted regression.
//!
//! The outer level is a cascade of `T` stage regressors. Each stage sees the
//! current shape estimates, computes regression targets in the mean-shape
//! frame, and fits `K` ferns to them one after another, each on the residual
//! left by its predecessors. After a stage, every shape moves by the summed
//! fern outputs mapped back into image coordinates.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::Image;
use crate::error::{EsrError, Result};
use crate::features::{generate_local_coordinates, sample_pixels, LocalCoordinate, PixelFeatureMatrix};
use crate::fern::{
    check_bin_span, compute_bin_outputs, feature_range, sample_thresholds, Fern, Shrinkage,
    MAX_FERN_FEATURES,
};
use crate::geometry::{align_similarity, compute_mean_shape, BoundingBox, Shape, SimilarityTransform};
use crate::matrix::TargetMatrix;
use crate::selection::{precompute_pixel_covariance, select_features};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    /// Initial shapes drawn per training image.
    pub n_aug: usize,
    /// Cascade stages `T`.
    pub t_stages: usize,
    /// Ferns per stage `K`.
    pub k_ferns: usize,
    /// Shape-indexed pixels per stage `P`.
    pub p_pixels: usize,
    /// Features per fern `F`.
    pub f_features: usize,
    /// Offset range of local coordinates, in mean-shape units.
    pub kappa: f64,
    /// Bin-output shrinkage.
    pub beta: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_aug: 20,
            t_stages: 10,
            k_ferns: 500,
            p_pixels: 400,
            f_features: 5,
            kappa: 0.3,
            beta: 1000.0,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EsrError::InvalidParameter(msg));
        if self.n_aug == 0 {
            return bad("n_aug must be >= 1".into());
        }
        if self.k_ferns == 0 {
            return bad("k_ferns must be >= 1".into());
        }
        if self.p_pixels < 2 {
            return bad(format!("p_pixels must be >= 2, got {}", self.p_pixels));
        }
        if self.f_features == 0 || self.f_features > MAX_FERN_FEATURES {
            return bad(format!(
                "f_features must be in 1..={MAX_FERN_FEATURES}, got {}",
                self.f_features
            ));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        Shrinkage::new(self.beta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestParams {
    pub n_init: usize,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams { n_init: 5 }
    }
}

impl TestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(EsrError::InvalidParameter("n_init must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exemplar shapes from which initial estimates are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSet {
    shapes: Vec<Shape>,
}

impl InitSet {
    pub fn new(shapes: Vec<Shape>) -> Result<Self> {
        let first = shapes.first().ok_or(EsrError::EmptyInput("init set"))?;
        for s in &shapes {
            first.check_conformable(s)?;
        }
        Ok(InitSet { shapes })
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn n_fp(&self) -> usize {
        self.shapes[0].n_fp()
    }
}

/// Scales and translates `exemplar` so its bounding box sits on `target`.
pub fn place_in_box(exemplar: &Shape, target: &BoundingBox) -> Shape {
    let bb = exemplar.bounding_box();
    let extent = bb.width + bb.height;
    let scale = if extent > 0.0 {
        (target.width + target.height) / extent
    } else {
        1.0
    };
    let (cx, cy) = bb.center();
    let (tx, ty) = target.center();
    SimilarityTransform::new(scale, 0.0, tx - scale * cx, ty - scale * cy).apply(exemplar)
}

/// An image to initialize, optionally with its ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub image: &'a Image,
    pub truth: Option<&'a Shape>,
    pub face_box: BoundingBox,
}

/// One augmented copy of a sample with its own starting shape.
#[derive(Debug, Clone)]
pub struct Replica<'a> {
    pub source: usize,
    pub image: &'a Image,
    pub truth: Option<&'a Shape>,
    pub initial: Shape,
}

/// Replicates each sample `d` times, drawing each replica's starting shape
/// from `init_set` (without replacement when the set is large enough) and
/// placing it in the sample's face box.
pub fn initialize<'a, R: Rng + ?Sized>(
    samples: &[Sample<'a>],
    d: usize,
    init_set: &InitSet,
    rng: &mut R,
) -> Result<Vec<Replica<'a>>> {
    if d == 0 {
        return Err(EsrError::InvalidParameter("replication count must be >= 1".into()));
    }
    if init_set.is_empty() {
        return Err(EsrError::EmptyInput("init set"));
    }
    let mut out = Vec::with_capacity(samples.len() * d);
    for (source, s) in samples.iter().enumerate() {
        let picks: Vec<usize> = if init_set.len() >= d {
            index::sample(rng, init_set.len(), d).into_vec()
        } else {
            (0..d).map(|_| rng.random_range(0..init_set.len())).collect()
        };
        for k in picks {
            out.push(Replica {
                source,
                image: s.image,
                truth: s.truth,
                initial: place_in_box(&init_set.shapes[k], &s.face_box),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRegressor {
    local_coords: Vec<LocalCoordinate>,
    ferns: Vec<Fern>,
}

impl StageRegressor {
    pub fn new(local_coords: Vec<LocalCoordinate>, ferns: Vec<Fern>) -> Result<Self> {
        if let Some(f) = ferns.first() {
            let dim = f.output_dim();
            let p = local_coords.len();
            for fern in &ferns {
                if fern.output_dim() != dim {
                    return Err(EsrError::InvalidParameter("ferns disagree on output size".into()));
                }
                if fern.pairs().iter().any(|&(m, n)| m >= p || n >= p) {
                    return Err(EsrError::InvalidParameter(format!(
                        "fern references a pixel beyond the {p} local coordinates"
                    )));
                }
            }
        }
        Ok(StageRegressor { local_coords, ferns })
    }

    pub fn local_coords(&self) -> &[LocalCoordinate] {
        &self.local_coords
    }

    pub fn ferns(&self) -> &[Fern] {
        &self.ferns
    }

    /// Sums every fern's output for one row of sampled intensities. Bins
    /// visited are appended to `trace` when given.
    fn regress(&self, pixels: &[f64], dim: usize, mut trace: Option<&mut Vec<usize>>) -> Vec<f64> {
        let mut delta = vec![0.0; dim];
        for fern in &self.ferns {
            let b = fern.bin_for_pixels(pixels);
            if let Some(t) = trace.as_deref_mut() {
                t.push(b);
            }
            for (d, v) in delta.iter_mut().zip(&fern.bin_outputs()[b]) {
                *d += v;
            }
        }
        delta
    }
}

/// Increment for `shape` predicted by one stage, in the mean-shape frame.
pub fn apply_stage_regressor(
    image: &Image,
    shape: &Shape,
    r: &StageRegressor,
    mean: &Shape,
) -> Result<Shape> {
    apply_stage_regressor_traced(image, shape, r, mean).map(|(s, _)| s)
}

/// Like [`apply_stage_regressor`] but also returns the bin each fern selected.
pub fn apply_stage_regressor_traced(
    image: &Image,
    shape: &Shape,
    r: &StageRegressor,
    mean: &Shape,
) -> Result<(Shape, Vec<usize>)> {
    mean.check_conformable(shape)?;
    let to_image = align_similarity(shape, mean)?.inverse()?;
    let mut pixels = vec![0.0; r.local_coords.len()];
    sample_pixels(image, shape, &to_image, &r.local_coords, &mut pixels)?;
    let mut trace = Vec::with_capacity(r.ferns.len());
    let delta = r.regress(&pixels, 2 * shape.n_fp(), Some(&mut trace));
    Ok((Shape::new(delta)?, trace))
}

/// One cascade step: `S + M_S^{-1} ∘ R(I, S)`.
pub fn advance_shape(image: &Image, shape: &Shape, r: &StageRegressor, mean: &Shape) -> Result<Shape> {
    let to_image = align_similarity(shape, mean)?.inverse()?;
    let mut pixels = vec![0.0; r.local_coords.len()];
    sample_pixels(image, shape, &to_image, &r.local_coords, &mut pixels)?;
    let delta = Shape::new(r.regress(&pixels, 2 * shape.n_fp(), None))?;
    shape.add(&to_image.apply_to_difference(&delta))
}

/// Result of fitting one stage.
#[derive(Debug, Clone)]
pub struct StageFit {
    pub regressor: StageRegressor,
    /// Per-sample sum of fern outputs, mean-shape frame.
    pub increments: Vec<Vec<f64>>,
    /// Sum of squared residuals before the first fern and after each fern.
    pub residual_sse: Vec<f64>,
}

/// Fits `K` ferns to `targets` by boosting on residuals.
///
/// `to_image[i]` must be the inverse normalizing transform of `shapes[i]`.
pub fn learn_stage_regressor<R: Rng + ?Sized>(
    targets: &TargetMatrix,
    images: &[&Image],
    shapes: &[Shape],
    to_image: &[SimilarityTransform],
    params: &TrainParams,
    rng: &mut R,
) -> Result<StageFit> {
    params.validate()?;
    let n = targets.n_rows();
    if images.len() != n || shapes.len() != n || to_image.len() != n {
        return Err(EsrError::InvalidParameter("stage inputs disagree on sample count".into()));
    }
    let n_fp = shapes.first().ok_or(EsrError::EmptyInput("stage samples"))?.n_fp();
    let dim = 2 * n_fp;
    if targets.n_cols() != dim {
        return Err(EsrError::ShapeMismatch {
            expected: n_fp,
            found: targets.n_cols() / 2,
        });
    }
    let shrinkage = Shrinkage::new(params.beta)?;
    let f = params.f_features;

    let coords = generate_local_coordinates(n_fp, params.p_pixels, params.kappa, rng)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; coords.len()];
            sample_pixels(images[i], &shapes[i], &to_image[i], &coords, &mut row)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = PixelFeatureMatrix::from_rows(rows, coords.clone())?;

    let mut residual = targets.clone();
    let mut increments = vec![vec![0.0; dim]; n];
    let mut residual_sse = vec![residual.sum_squares()];
    let mut ferns = Vec::with_capacity(params.k_ferns);

    if residual.is_zero() {
        ferns.resize(params.k_ferns, Fern::zero(f, dim));
        residual_sse.resize(params.k_ferns + 1, 0.0);
        return Ok(StageFit {
            regressor: StageRegressor::new(coords, ferns)?,
            increments,
            residual_sse,
        });
    }

    let cache = precompute_pixel_covariance(&rho)?;
    for _ in 0..params.k_ferns {
        if residual.is_zero() {
            ferns.push(Fern::zero(f, dim));
            residual_sse.push(0.0);
            continue;
        }
        let pairs = select_features(&residual, &rho, &cache, f, rng)?;
        let features: Vec<f64> = rho
            .rows()
            .flat_map(|row| pairs.iter().map(move |&(m, n)| row[m] - row[n]))
            .collect();
        let thresholds = sample_thresholds(feature_range(&features), f, rng)?;
        let fern = Fern::new(pairs, thresholds, vec![vec![0.0; dim]; 1 << f])?;
        let bins: Vec<usize> = rho.rows().map(|row| fern.bin_for_pixels(row)).collect();
        let outputs = compute_bin_outputs(&residual, &bins, 1 << f, shrinkage)?;
        check_bin_span(&residual, &bins, &outputs, shrinkage)?;
        let fern = Fern::new(fern.pairs().to_vec(), fern.thresholds().to_vec(), outputs)?;

        for (i, &b) in bins.iter().enumerate() {
            let out = &fern.bin_outputs()[b];
            for ((r, inc), v) in residual.row_mut(i).iter_mut().zip(&mut increments[i]).zip(out) {
                *r -= v;
                *inc += v;
            }
        }
        residual_sse.push(residual.sum_squares());
        ferns.push(fern);
    }
    Ok(StageFit {
        regressor: StageRegressor::new(coords, ferns)?,
        increments,
        residual_sse,
    })
}

/// A trained cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct EsrModel {
    pub format_version: u32,
    pub n_fp: usize,
    pub mean_shape: Shape,
    pub params: TrainParams,
    pub stages: Vec<StageRegressor>,
    /// Exemplars used to initialize prediction.
    pub init_set: InitSet,
}

impl EsrModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EsrError::InvariantViolation(msg));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported model version {}", self.format_version));
        }
        if self.mean_shape.n_fp() != self.n_fp || self.init_set.n_fp() != self.n_fp {
            return bad("mean shape or init set disagree with n_fp".into());
        }
        if self.stages.len() != self.params.t_stages {
            return bad(format!(
                "{} stages but params declare {}",
                self.stages.len(),
                self.params.t_stages
            ));
        }
        for (t, stage) in self.stages.iter().enumerate() {
            if stage.local_coords.len() != self.params.p_pixels {
                return bad(format!("stage {t}: local coordinate count mismatch"));
            }
            if stage.local_coords.iter().any(|c| c.landmark >= self.n_fp) {
                return bad(format!("stage {t}: landmark index out of range"));
            }
            if stage.ferns.len() != self.params.k_ferns {
                return bad(format!("stage {t}: fern count mismatch"));
            }
            for fern in &stage.ferns {
                if fern.depth() != self.params.f_features || fern.output_dim() != 2 * self.n_fp {
                    return bad(format!("stage {t}: fern shape mismatch"));
                }
            }
        }
        Ok(())
    }

    /// Starting estimate that places the mean shape in `face_box`.
    pub fn mean_shape_in_box(&self, face_box: &BoundingBox) -> Shape {
        place_in_box(&self.mean_shape, face_box)
    }
}

/// Training progress after one stage (stage 0 is the initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    /// Mean over replicas of `||M_S (S_hat - S)|| / N_fp`, in mean-shape units.
    pub train_error: f64,
    /// Residual sum of squares after each fern of this stage (empty for stage 0).
    pub residual_sse: Vec<f64>,
}

/// Mean normalized alignment error of `shapes` against their ground truth.
fn normalized_error(truths: &[&Shape], shapes: &[Shape], mean: &Shape) -> Result<f64> {
    let errors = truths
        .par_iter()
        .zip(shapes)
        .map(|(t, s)| {
            let m = align_similarity(s, mean)?;
            Ok(m.apply_to_difference(&t.difference(s)?).norm() / s.n_fp() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Trains a cascade on `(image, ground truth)` pairs.
pub fn train(labeled: &[(&Image, &Shape)], params: &TrainParams, init_set: &InitSet) -> Result<EsrModel> {
    train_with_observer(labeled, params, init_set, |_| {})
}

/// [`train`], reporting each stage to `observe` as it completes.
pub fn train_with_observer(
    labeled: &[(&Image, &Shape)],
    params: &TrainParams,
    init_set: &InitSet,
    mut observe: impl FnMut(&StageReport),
) -> Result<EsrModel> {
    params.validate()?;
    if labeled.len() < 2 {
        return Err(EsrError::InvalidParameter(format!(
            "training needs at least 2 labeled samples, got {}",
            labeled.len()
        )));
    }
    let truths: Vec<&Shape> = labeled.iter().map(|(_, s)| *s).collect();
    let n_fp = truths[0].n_fp();
    if init_set.n_fp() != n_fp {
        return Err(EsrError::ShapeMismatch {
            expected: n_fp,
            found: init_set.n_fp(),
        });
    }
    let mean = compute_mean_shape(&truths.iter().map(|s| (*s).clone()).collect::<Vec<_>>())?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples: Vec<Sample> = labeled
        .iter()
        .map(|&(image, truth)| Sample {
            image,
            truth: Some(truth),
            face_box: truth.bounding_box(),
        })
        .collect();
    let replicas = initialize(&samples, params.n_aug, init_set, &mut rng)?;
    let images: Vec<&Image> = replicas.iter().map(|r| r.image).collect();
    let rep_truths: Vec<&Shape> = replicas.iter().map(|r| r.truth.expect("labeled")).collect();
    let mut shapes: Vec<Shape> = replicas.into_iter().map(|r| r.initial).collect();

    observe(&StageReport {
        stage: 0,
        train_error: normalized_error(&rep_truths, &shapes, &mean)?,
        residual_sse: Vec::new(),
    });

    let mut stages = Vec::with_capacity(params.t_stages);
    for t in 1..=params.t_stages {
        let normalizers = shapes
            .par_iter()
            .map(|s| align_similarity(s, &mean))
            .collect::<Result<Vec<_>>>()?;
        let to_image = normalizers
            .iter()
            .map(SimilarityTransform::inverse)
            .collect::<Result<Vec<_>>>()?;
        let target_rows = rep_truths
            .iter()
            .zip(&shapes)
            .zip(&normalizers)
            .map(|((truth, s), m)| Ok(m.apply_to_difference(&truth.difference(s)?).into_coords()))
            .collect::<Result<Vec<_>>>()?;
        let targets = TargetMatrix::from_rows(&target_rows)?;

        let fit = learn_stage_regressor(&targets, &images, &shapes, &to_image, params, &mut rng)?;
        for ((s, inc), back) in shapes.iter_mut().zip(fit.increments).zip(&to_image) {
            *s = s.add(&back.apply_to_difference(&Shape::new(inc)?))?;
        }
        stages.push(fit.regressor);
        observe(&StageReport {
            stage: t,
            train_error: normalized_error(&rep_truths, &shapes, &mean)?,
            residual_sse: fit.residual_sse,
        });
    }

    let model = EsrModel {
        format_version: MODEL_FORMAT_VERSION,
        n_fp,
        mean_shape: mean,
        params: params.clone(),
        stages,
        init_set: init_set.clone(),
    };
    model.validate()?;
    Ok(model)
}

/// Runs the full cascade from one starting shape.
pub fn run_cascade(model: &EsrModel, image: &Image, initial: &Shape) -> Result<Shape> {
    model.mean_shape.check_conformable(initial)?;
    model
        .stages
        .iter()
        .try_fold(initial.clone(), |s, stage| advance_shape(image, &s, stage, &model.mean_shape))
}

/// Predicts a shape from `n_init` starting shapes and combines the results.
/// Without a face box the whole image is used.
pub fn predict<R: Rng + ?Sized>(
    model: &EsrModel,
    image: &Image,
    face_box: Option<&BoundingBox>,
    test_params: &TestParams,
    init_set: &InitSet,
    rng: &mut R,
) -> Result<Shape> {
    test_params.validate()?;
    if init_set.n_fp() != model.n_fp {
        return Err(EsrError::ShapeMismatch {
            expected: model.n_fp,
            found: init_set.n_fp(),
        });
    }
    let face_box = face_box
        .copied()
        .unwrap_or_else(|| BoundingBox::new(0.0, 0.0, image.width() as f64, image.height() as f64));
    let sample = Sample {
        image,
        truth: None,
        face_box,
    };
    let replicas = initialize(&[sample], test_params.n_init, init_set, rng)?;
    let results = replicas
        .iter()
        .map(|r| run_cascade(model, image, &r.initial))
        .collect::<Result<Vec<_>>>()?;
    combine_multiple_results(&results)
}

/// Per-coordinate median; the lower median for even counts.
pub fn combine_multiple_results(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes.first().ok_or(EsrError::EmptyInput("shapes to combine"))?;
    for s in shapes {
        first.check_conformable(s)?;
    }
    let mid = (shapes.len() - 1) / 2;
    let coords = (0..first.coords().len())
        .map(|d| {
            let mut column: Vec<f64> = shapes.iter().map(|s| s.coords()[d]).collect();
            column.sort_by(f64::total_cmp);
            column[mid]
        })
        .collect();
    Shape::new(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(dx: f64) -> Shape {
        Shape::from_points(&[(0.0 + dx, 0.0), (10.0, 0.0), (5.0, 8.0)]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(TrainParams::default().validate().is_ok());
        let d = TrainParams::default();
        assert_eq!((d.t_stages, d.k_ferns, d.f_features, d.n_aug), (10, 500, 5, 20));
        assert!(TrainParams { f_features: 17, ..d.clone() }.validate().is_err());
        assert!(TrainParams { p_pixels: 1, ..d.clone() }.validate().is_err());
        assert!(TrainParams { beta: -1.0, ..d.clone() }.validate().is_err());
        assert!(TrainParams { t_stages: 0, ..d }.validate().is_ok());
        assert!(TestParams { n_init: 0 }.validate().is_err());
    }

    #[test]
    fn box_placement() {
        let s = tri(0.0);
        let placed = place_in_box(&s, &BoundingBox::new(100.0, 50.0, 20.0, 16.0));
        let bb = placed.bounding_box();
        assert!((bb.x - 100.0).abs() < 1e-12 && (bb.y - 50.0).abs() < 1e-12);
        assert!((bb.width - 20.0).abs() < 1e-12 && (bb.height - 16.0).abs() < 1e-12);
        assert_eq!(place_in_box(&s, &s.bounding_box()), s);
    }

    #[test]
    fn initialize_single_exemplar() {
        let img = Image::from_fn(4, 4, |_, _| 0);
        let truth = tri(1.0);
        let set = InitSet::new(vec![tri(0.0)]).unwrap();
        let b = tri(0.0).bounding_box();
        let samples = [Sample { image: &img, truth: Some(&truth), face_box: b }; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let reps = initialize(&samples, 1, &set, &mut rng).unwrap();
        assert_eq!(reps.len(), 3);
        assert!(reps.iter().all(|r| r.initial == tri(0.0)));
        assert!(initialize(&samples, 0, &set, &mut rng).is_err());
        assert!(InitSet::new(vec![]).is_err());
    }

    #[test]
    fn initialize_draws_distinct_when_possible() {
        let img = Image::from_fn(4, 4, |_, _| 0);
        let set = InitSet::new((0..6).map(|k| tri(k as f64)).collect()).unwrap();
        let b = BoundingBox::new(0.0, 0.0, 10.0, 8.0);
        let samples = [Sample { image: &img, truth: None, face_box: b }; 2];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = initialize(&samples, 6, &set, &mut rng).unwrap();
        for group in reps.chunks(6) {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    assert_ne!(a.initial, b.initial);
                }
            }
        }
    }

    #[test]
    fn median_combination() {
        let a = Shape::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(combine_multiple_results(&[a.clone(), a.clone()]).unwrap(), a);
        let outlier = Shape::new(vec![1000.0, -1000.0, 3.0, 4.0]).unwrap();
        let b = Shape::new(vec![1.5, 2.5, 3.0, 4.0]).unwrap();
        let m = combine_multiple_results(&[a.clone(), outlier, b]).unwrap();
        assert_eq!(m.coords(), &[1.5, 2.0, 3.0, 4.0]);
        assert!(combine_multiple_results(&[]).is_err());
    }

    #[test]
    fn even_count_uses_lower_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for count in [2usize, 4, 6] {
            let shapes: Vec<Shape> = (0..count)
                .map(|_| Shape::new((0..6).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap())
                .collect();
            let m = combine_multiple_results(&shapes).unwrap();
            for d in 0..6 {
                let mut col: Vec<f64> = shapes.iter().map(|s| s.coords()[d]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                assert_eq!(m.coords()[d], col[count / 2 - 1]);
            }
        }
    }

    #[test]
    fn zero_targets_short_circuit() {
        let img = Image::from_fn(16, 16, |x, y| (x * y) as u8);
        let s = tri(0.0);
        let targets = TargetMatrix::zeros(3, 6);
        let to_image = vec![SimilarityTransform::IDENTITY; 3];
        let params = TrainParams { k_ferns: 4, p_pixels: 5, ..TrainParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fit = learn_stage_regressor(
            &targets,
            &[&img, &img, &img],
            &[s.clone(), s.clone(), s.clone()],
            &to_image,
            &params,
            &mut rng,
        )
        .unwrap();
        assert_eq!(fit.regressor.ferns().len(), 4);
        assert!(fit
            .regressor
            .ferns()
            .iter()
            .all(|f| f.bin_outputs().iter().flatten().all(|&v| v == 0.0)));
        assert!(fit.increments.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn stage_with_known_fern() {
        let img = Image::from_fn(20, 20, |x, _| (x * 10) as u8);
        let mean = tri(0.0);
        let coords = vec![
            LocalCoordinate { landmark: 1, dx: 0.0, dy: 0.0 },
            LocalCoordinate { landmark: 0, dx: 0.0, dy: 0.0 },
        ];
        let fern = Fern::new(
            vec![(0, 1)],
            vec![0.0],
            vec![vec![9.0; 6], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]],
        )
        .unwrap();
        let stage = StageRegressor::new(coords.clone(), vec![fern]).unwrap();
        let (inc, bins) = apply_stage_regressor_traced(&img, &mean, &stage, &mean).unwrap();
        assert_eq!(bins, vec![1]);
        assert_eq!(inc.coords(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let zero = StageRegressor::new(coords, vec![Fern::zero(1, 6)]).unwrap();
        let inc = apply_stage_regressor(&img, &mean, &zero, &mean).unwrap();
        assert!(inc.coords().iter().all(|&v| v == 0.0));
    }
}
