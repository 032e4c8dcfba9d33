//! Shapes, 2-D similarity transforms and Procrustes alignment.
//!
//! A [`Shape`] is a flat `[x0, y0, x1, y1, ...]` vector of landmark
//! coordinates. Regression targets and fern outputs live in the frame of the
//! mean shape; [`align_similarity`] gives the least-squares similarity that
//! carries a shape into that frame.

use crate::error::{EsrError, Result};

/// Maximum generalized-Procrustes iterations in [`compute_mean_shape`].
pub const PROCRUSTES_MAX_ITERS: usize = 100;
/// Convergence threshold on the Euclidean change of the mean shape.
pub const PROCRUSTES_TOL: f64 = 1e-8;

/// Ordered landmark coordinates `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    coords: Vec<f64>,
}

impl Shape {
    /// Builds a shape from interleaved coordinates. Requires an even length of
    /// at least four (two landmarks) and finite values.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(EsrError::InvalidShape(format!(
                "odd coordinate count {}",
                coords.len()
            )));
        }
        if coords.len() < 4 {
            return Err(EsrError::InvalidShape(
                "a shape needs at least two landmarks".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(EsrError::InvalidShape("non-finite coordinate".into()));
        }
        Ok(Shape { coords })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Shape::new(points.iter().flat_map(|&(x, y)| [x, y]).collect())
    }

    pub fn zeros(n_fp: usize) -> Result<Self> {
        Shape::new(vec![0.0; 2 * n_fp])
    }

    /// Number of landmarks.
    pub fn n_fp(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Zero-based landmark accessor.
    pub fn landmark(&self, l: usize) -> Result<(f64, f64)> {
        if l >= self.n_fp() {
            return Err(EsrError::LandmarkOutOfRange {
                index: l,
                n_fp: self.n_fp(),
            });
        }
        Ok((self.coords[2 * l], self.coords[2 * l + 1]))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coords.chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.n_fp() as f64;
        let (sx, sy) = self
            .points()
            .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
        (sx / n, sy / n)
    }

    /// Root-mean-square landmark distance from the centroid.
    pub fn rms_scale(&self) -> f64 {
        let (cx, cy) = self.centroid();
        let ss: f64 = self
            .points()
            .map(|(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
            .sum();
        (ss / self.n_fp() as f64).sqrt()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in self.points() {
            min = (min.0.min(x), min.1.min(y));
            max = (max.0.max(x), max.1.max(y));
        }
        BoundingBox {
            x: min.0,
            y: min.1,
            width: max.0 - min.0,
            height: max.1 - min.1,
        }
    }

    /// `self - other`, coordinate-wise.
    pub fn difference(&self, other: &Shape) -> Result<Shape> {
        self.check_conformable(other)?;
        Ok(Shape {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self + delta`, coordinate-wise.
    pub fn add(&self, delta: &Shape) -> Result<Shape> {
        self.check_conformable(delta)?;
        Ok(Shape {
            coords: self
                .coords
                .iter()
                .zip(&delta.coords)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn check_conformable(&self, other: &Shape) -> Result<()> {
        if self.n_fp() != other.n_fp() {
            return Err(EsrError::ShapeMismatch {
                expected: self.n_fp(),
                found: other.n_fp(),
            });
        }
        Ok(())
    }
}

/// `(x_l, y_l)` of landmark `l` (zero-based).
pub fn landmark_of(s: &Shape, l: usize) -> Result<(f64, f64)> {
    s.landmark(l)
}

/// Axis-aligned box in pixels, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        BoundingBox {
            x,
            y,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }
}

/// Similarity map `p -> [[a, -b], [b, a]] p + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(a: f64, b: f64, tx: f64, ty: f64) -> Self {
        SimilarityTransform { a, b, tx, ty }
    }

    /// Transform with the given uniform scale, rotation (radians) and translation.
    pub fn from_scale_rotation(scale: f64, angle: f64, tx: f64, ty: f64) -> Self {
        SimilarityTransform {
            a: scale * angle.cos(),
            b: scale * angle.sin(),
            tx,
            ty,
        }
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn rotation(&self) -> f64 {
        self.b.atan2(self.a)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.a * self.a + self.b * self.b > 0.0)
    }

    /// Applies the rotation-scale part only, as for a displacement vector.
    #[inline]
    pub fn apply_linear(&self, dx: f64, dy: f64) -> (f64, f64) {
        (self.a * dx - self.b * dy, self.b * dx + self.a * dy)
    }

    #[inline]
    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.apply_linear(x, y);
        (u + self.tx, v + self.ty)
    }

    /// Maps every landmark of `s`.
    pub fn apply(&self, s: &Shape) -> Shape {
        Shape {
            coords: s
                .points()
                .flat_map(|(x, y)| {
                    let (u, v) = self.apply_point(x, y);
                    [u, v]
                })
                .collect(),
        }
    }

    /// Maps a shape difference: translation cancels, only the linear part acts.
    pub fn apply_to_difference(&self, d: &Shape) -> Shape {
        Shape {
            coords: d
                .points()
                .flat_map(|(x, y)| {
                    let (u, v) = self.apply_linear(x, y);
                    [u, v]
                })
                .collect(),
        }
    }

    pub fn inverse(&self) -> Result<SimilarityTransform> {
        let r = self.a * self.a + self.b * self.b;
        if !(r > 0.0) || !r.is_finite() {
            return Err(EsrError::DegenerateTransform);
        }
        let a = self.a / r;
        let b = -self.b / r;
        let inv = SimilarityTransform { a, b, tx: 0.0, ty: 0.0 };
        let (tx, ty) = inv.apply_linear(-self.tx, -self.ty);
        Ok(SimilarityTransform { a, b, tx, ty })
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let (tx, ty) = self.apply_point(other.tx, other.ty);
        SimilarityTransform {
            a: self.a * other.a - self.b * other.b,
            b: self.a * other.b + self.b * other.a,
            tx,
            ty,
        }
    }
}

pub fn apply_transform(m: &SimilarityTransform, s: &Shape) -> Shape {
    m.apply(s)
}

pub fn invert_transform(m: &SimilarityTransform) -> Result<SimilarityTransform> {
    m.inverse()
}

/// Least-squares similarity `M` minimizing `||dst - M∘src||`.
pub fn align_similarity(src: &Shape, dst: &Shape) -> Result<SimilarityTransform> {
    src.check_conformable(dst)?;
    let (sx, sy) = src.centroid();
    let (dx, dy) = dst.centroid();
    let mut norm = 0.0;
    let mut dot = 0.0;
    let mut cross = 0.0;
    for ((x, y), (u, v)) in src.points().zip(dst.points()) {
        let (x, y) = (x - sx, y - sy);
        let (u, v) = (u - dx, v - dy);
        norm += x * x + y * y;
        dot += x * u + y * v;
        cross += x * v - y * u;
    }
    // Relative test so that tiny-but-valid shapes still align.
    let scale_ref = src
        .coords()
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    if !(norm > 1e-24 * scale_ref * scale_ref * src.n_fp() as f64) {
        return Err(EsrError::DegenerateShape);
    }
    let a = dot / norm;
    let b = cross / norm;
    let linear = SimilarityTransform { a, b, tx: 0.0, ty: 0.0 };
    let (rx, ry) = linear.apply_linear(sx, sy);
    Ok(SimilarityTransform {
        a,
        b,
        tx: dx - rx,
        ty: dy - ry,
    })
}

/// Centers a shape on the origin and scales it to unit RMS radius.
pub fn normalize_to_reference(s: &Shape) -> Result<Shape> {
    let (cx, cy) = s.centroid();
    let scale = s.rms_scale();
    if !(scale > 0.0) {
        return Err(EsrError::DegenerateShape);
    }
    Ok(Shape {
        coords: s
            .points()
            .flat_map(|(x, y)| [(x - cx) / scale, (y - cy) / scale])
            .collect(),
    })
}

/// Generalized Procrustes mean in a centered, unit-RMS frame whose
/// orientation is fixed by the first input shape.
pub fn compute_mean_shape(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes.first().ok_or(EsrError::EmptyInput("shapes"))?;
    for s in shapes {
        first.check_conformable(s)?;
    }
    let reference = normalize_to_reference(first)?;
    let mut mean = reference.clone();
    let n = shapes.len() as f64;
    for _ in 0..PROCRUSTES_MAX_ITERS {
        let mut acc = vec![0.0; mean.coords.len()];
        for s in shapes {
            let aligned = align_similarity(s, &mean)?.apply(s);
            for (a, c) in acc.iter_mut().zip(aligned.coords()) {
                *a += c;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        let avg = normalize_to_reference(&Shape { coords: acc })?;
        let oriented = align_similarity(&avg, &reference)?.apply(&avg);
        let next = normalize_to_reference(&oriented)?;
        let moved = next.difference(&mean)?.norm();
        mean = next;
        if moved < PROCRUSTES_TOL {
            break;
        }
    }
    Ok(mean)
}

/// Normalized regression target `M_prev ∘ (s_hat - s_prev)` with
/// `M_prev = align_similarity(s_prev, mean)` acting through its linear part.
pub fn normalize_target(s_hat: &Shape, s_prev: &Shape, mean: &Shape) -> Result<Shape> {
    let m = align_similarity(s_prev, mean)?;
    Ok(m.apply_to_difference(&s_hat.difference(s_prev)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_shape(rng: &mut impl Rng, n_fp: usize) -> Shape {
        Shape::new((0..2 * n_fp).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap()
    }

    fn assert_transform_close(m: &SimilarityTransform, e: &SimilarityTransform, tol: f64) {
        assert!((m.a - e.a).abs() < tol, "a {} vs {}", m.a, e.a);
        assert!((m.b - e.b).abs() < tol, "b {} vs {}", m.b, e.b);
        assert!((m.tx - e.tx).abs() < tol, "tx {} vs {}", m.tx, e.tx);
        assert!((m.ty - e.ty).abs() < tol, "ty {} vs {}", m.ty, e.ty);
    }

    #[test]
    fn shape_validation() {
        assert!(Shape::new(vec![1.0, 2.0]).is_err());
        assert!(Shape::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(Shape::new(vec![1.0, f64::NAN, 3.0, 4.0]).is_err());
        assert_eq!(Shape::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap().n_fp(), 2);
    }

    #[test]
    fn align_identity_and_translation() {
        let s = Shape::from_points(&[(0.0, 0.0), (4.0, 1.0), (2.0, 5.0)]).unwrap();
        assert_transform_close(
            &align_similarity(&s, &s).unwrap(),
            &SimilarityTransform::IDENTITY,
            1e-12,
        );
        let shifted = SimilarityTransform::new(1.0, 0.0, 3.0, -2.0).apply(&s);
        assert_transform_close(
            &align_similarity(&s, &shifted).unwrap(),
            &SimilarityTransform::new(1.0, 0.0, 3.0, -2.0),
            1e-12,
        );
    }

    #[test]
    fn align_recovers_known_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_shape(&mut rng, 10);
        let m = SimilarityTransform::from_scale_rotation(2.0, 30f64.to_radians(), 1.0, 1.0);
        let got = align_similarity(&s, &m.apply(&s)).unwrap();
        assert_transform_close(&got, &m, 1e-9);
        assert!((got.scale() - 2.0).abs() < 1e-9);
        assert!((got.rotation() - 30f64.to_radians()).abs() < 1e-9);
    }

    #[test]
    fn align_rejects_coincident_landmarks() {
        let s = Shape::from_points(&[(3.0, 3.0), (3.0, 3.0), (3.0, 3.0)]).unwrap();
        let t = Shape::from_points(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        assert!(matches!(
            align_similarity(&s, &t),
            Err(EsrError::DegenerateShape)
        ));
    }

    #[test]
    fn apply_rotation_quarter_turn() {
        let s = Shape::from_points(&[(1.0, 0.0), (0.0, 0.0)]).unwrap();
        let r = SimilarityTransform::new(0.0, 1.0, 0.0, 0.0).apply(&s);
        assert_eq!(r.landmark(0).unwrap(), (0.0, 1.0));
        assert_eq!(SimilarityTransform::IDENTITY.apply(&s), s);
    }

    #[test]
    fn invert_simple_cases() {
        assert_eq!(
            SimilarityTransform::IDENTITY.inverse().unwrap(),
            SimilarityTransform::IDENTITY
        );
        let t = SimilarityTransform::new(1.0, 0.0, 5.0, 0.0).inverse().unwrap();
        assert_transform_close(&t, &SimilarityTransform::new(1.0, 0.0, -5.0, 0.0), 1e-15);
        assert!(matches!(
            SimilarityTransform::new(0.0, 0.0, 1.0, 1.0).inverse(),
            Err(EsrError::DegenerateTransform)
        ));
    }

    #[test]
    fn landmark_access() {
        let s = Shape::new(vec![7.0, 8.0, 1.0, 2.0, 5.0, 6.0]).unwrap();
        assert_eq!(landmark_of(&s, 0).unwrap(), (7.0, 8.0));
        assert_eq!(landmark_of(&s, 2).unwrap(), (5.0, 6.0));
        assert!(matches!(
            landmark_of(&s, 3),
            Err(EsrError::LandmarkOutOfRange { index: 3, n_fp: 3 })
        ));
    }

    #[test]
    fn mean_shape_single_and_congruent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_shape(&mut rng, 6);
        let mean = compute_mean_shape(std::slice::from_ref(&s)).unwrap();
        let reference = normalize_to_reference(&s).unwrap();
        assert!(mean.difference(&reference).unwrap().norm() < 1e-12);
        assert!((mean.rms_scale() - 1.0).abs() < 1e-12);

        let m = SimilarityTransform::from_scale_rotation(1.7, -0.4, 12.0, 3.0);
        let mean2 = compute_mean_shape(&[s.clone(), m.apply(&s)]).unwrap();
        let residual = align_similarity(&s, &mean2).unwrap().apply(&s).difference(&mean2).unwrap();
        assert!(residual.norm() < 1e-6);
    }

    #[test]
    fn mean_shape_rejects_empty_and_mixed() {
        assert!(matches!(compute_mean_shape(&[]), Err(EsrError::EmptyInput(_))));
        let a = Shape::zeros(2).unwrap();
        let b = Shape::zeros(3).unwrap();
        assert!(compute_mean_shape(&[a, b]).is_err());
    }

    #[test]
    fn mean_shape_is_central() {
        // Brute-force: each shape's aligned distance to the mean is at most the
        // largest pairwise aligned distance between input shapes.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_shape(&mut rng, 8);
        let shapes: Vec<Shape> = (0..50)
            .map(|_| {
                let noisy = Shape::new(
                    base.coords()
                        .iter()
                        .map(|c| c + rng.random_range(-4.0..4.0))
                        .collect(),
                )
                .unwrap();
                SimilarityTransform::from_scale_rotation(
                    rng.random_range(0.5..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                )
                .apply(&noisy)
            })
            .collect();
        let normalized: Vec<Shape> = shapes
            .iter()
            .map(|s| normalize_to_reference(s).unwrap())
            .collect();
        let aligned_dist = |a: &Shape, b: &Shape| {
            align_similarity(a, b).unwrap().apply(a).difference(b).unwrap().norm()
        };
        let mut max_pair: f64 = 0.0;
        for i in 0..normalized.len() {
            for j in 0..normalized.len() {
                if i != j {
                    max_pair = max_pair.max(aligned_dist(&normalized[i], &normalized[j]));
                }
            }
        }
        let mean = compute_mean_shape(&shapes).unwrap();
        for s in &normalized {
            assert!(aligned_dist(s, &mean) <= max_pair);
        }
    }

    #[test]
    fn normalize_target_cases() {
        let mean = Shape::from_points(&[(-1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        let zero = normalize_target(&mean, &mean, &mean).unwrap();
        assert!(zero.coords().iter().all(|&c| c == 0.0));

        let s_hat = Shape::from_points(&[(0.0, 0.5), (2.0, 0.0), (0.5, 1.0)]).unwrap();
        let y = normalize_target(&s_hat, &mean, &mean).unwrap();
        let d = s_hat.difference(&mean).unwrap();
        for (a, b) in y.coords().iter().zip(d.coords()) {
            assert!((a - b).abs() < 1e-12);
        }

        // s_prev is the mean rotated by +90°; aligning it back to the mean is a
        // -90° rotation, which sends a (1, 0) step to (0, -1).
        let quarter = SimilarityTransform::new(0.0, 1.0, 0.0, 0.0);
        let s_prev = quarter.apply(&mean);
        let s_hat = s_prev
            .add(&Shape::from_points(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]).unwrap())
            .unwrap();
        let oracle = align_similarity(&s_prev, &mean).unwrap();
        assert!((oracle.a).abs() < 1e-12 && (oracle.b + 1.0).abs() < 1e-12);
        let y = normalize_target(&s_hat, &s_prev, &mean).unwrap();
        for (x, yv) in y.points() {
            assert!(x.abs() < 1e-12);
            assert!((yv + 1.0).abs() < 1e-12);
        }
    }

    fn arb_transform() -> impl Strategy<Value = SimilarityTransform> {
        (0.1f64..10.0, -3.1f64..3.1, -100.0f64..100.0, -100.0f64..100.0)
            .prop_map(|(s, r, tx, ty)| SimilarityTransform::from_scale_rotation(s, r, tx, ty))
    }

    fn arb_shape() -> impl Strategy<Value = Shape> {
        (2usize..12)
            .prop_flat_map(|n| proptest::collection::vec(-100.0f64..100.0, 2 * n))
            .prop_filter_map("degenerate", |c| {
                let s = Shape::new(c).ok()?;
                (s.rms_scale() > 1e-3).then_some(s)
            })
    }

    proptest! {
        #[test]
        fn align_self_is_identity(s in arb_shape()) {
            let m = align_similarity(&s, &s).unwrap();
            prop_assert!((m.a - 1.0).abs() < 1e-9 && m.b.abs() < 1e-9);
            prop_assert!(m.tx.abs() < 1e-9 && m.ty.abs() < 1e-9);
        }

        #[test]
        fn inverse_roundtrips(m in arb_transform(), s in arb_shape()) {
            let inv = m.inverse().unwrap();
            let id = m.compose(&inv);
            prop_assert!((id.a - 1.0).abs() < 1e-9 && id.b.abs() < 1e-9);
            prop_assert!(id.tx.abs() < 1e-9 && id.ty.abs() < 1e-9);
            let back = inv.apply(&m.apply(&s));
            for (a, b) in back.coords().iter().zip(s.coords()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let twice = inv.inverse().unwrap();
            prop_assert!((twice.a - m.a).abs() < 1e-9 && (twice.b - m.b).abs() < 1e-9);
            prop_assert!((twice.tx - m.tx).abs() < 1e-9 && (twice.ty - m.ty).abs() < 1e-9);
        }

        #[test]
        fn landmark_commutes_with_transform(m in arb_transform(), s in arb_shape()) {
            let moved = m.apply(&s);
            for l in 0..s.n_fp() {
                let (x, y) = s.landmark(l).unwrap();
                prop_assert_eq!(moved.landmark(l).unwrap(), m.apply_point(x, y));
            }
        }

        #[test]
        fn normalize_target_translation_invariant(
            s_prev in arb_shape(),
            shift in (-50.0f64..50.0, -50.0f64..50.0),
            noise in proptest::collection::vec(-5.0f64..5.0, 24),
        ) {
            let n = s_prev.n_fp();
            let mean = normalize_to_reference(&s_prev.add(&Shape::new(noise[..2 * n].to_vec()).unwrap()).unwrap()).unwrap();
            let s_hat = s_prev.add(&Shape::new(noise[..2 * n].iter().map(|v| v * 0.5).collect()).unwrap()).unwrap();
            let t = SimilarityTransform::new(1.0, 0.0, shift.0, shift.1);
            let y0 = normalize_target(&s_hat, &s_prev, &mean).unwrap();
            let y1 = normalize_target(&t.apply(&s_hat), &t.apply(&s_prev), &mean).unwrap();
            for (a, b) in y0.coords().iter().zip(y1.coords()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mean_shape_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = random_shape(&mut rng, 7);
        let shapes: Vec<Shape> = (0..20)
            .map(|_| {
                Shape::new(
                    base.coords()
                        .iter()
                        .map(|c| c + rng.random_range(-3.0..3.0))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let g = SimilarityTransform::from_scale_rotation(0.6, 2.1, -30.0, 44.0);
        let moved: Vec<Shape> = shapes.iter().map(|s| g.apply(s)).collect();
        let m0 = compute_mean_shape(&shapes).unwrap();
        let m1 = compute_mean_shape(&moved).unwrap();
        let residual = align_similarity(&m1, &m0).unwrap().apply(&m1).difference(&m0).unwrap();
        assert!(residual.norm() < 1e-6, "residual {}", residual.norm());
    }
}
