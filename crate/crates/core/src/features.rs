//! Shape-indexed pixel features.
//!
//! Each [`LocalCoordinate`] names a landmark and an offset expressed in the
//! mean-shape frame. For a sample with current shape `S`, the offset is carried
//! into image space by the inverse of the similarity that aligns `S` to the
//! mean shape, then added to the landmark position. The sampled intensities
//! form a row of the [`PixelFeatureMatrix`]; differences of two columns are the
//! fern's raw features.

use rand::Rng;
use rayon::prelude::*;

use crate::dataio::Image;
use crate::error::{EsrError, Result};
use crate::geometry::{align_similarity, Shape, SimilarityTransform};

/// A landmark index (zero-based) plus an offset in the mean-shape frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoordinate {
    pub landmark: usize,
    pub dx: f64,
    pub dy: f64,
}

/// Draws `p` local coordinates: landmark uniform over `0..n_fp`, offsets
/// uniform over `[-kappa, kappa]^2`.
pub fn generate_local_coordinates<R: Rng + ?Sized>(
    n_fp: usize,
    p: usize,
    kappa: f64,
    rng: &mut R,
) -> Result<Vec<LocalCoordinate>> {
    if p == 0 {
        return Err(EsrError::InvalidParameter("pixel count must be >= 1".into()));
    }
    if n_fp == 0 {
        return Err(EsrError::InvalidParameter("landmark count must be >= 1".into()));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(EsrError::InvalidParameter(format!(
            "kappa must be positive and finite, got {kappa}"
        )));
    }
    Ok((0..p)
        .map(|_| LocalCoordinate {
            landmark: rng.random_range(0..n_fp),
            dx: rng.random_range(-kappa..=kappa),
            dy: rng.random_range(-kappa..=kappa),
        })
        .collect())
}

/// `N x P` intensities sampled at shape-indexed locations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    coords: Vec<LocalCoordinate>,
}

impl PixelFeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, coords: Vec<LocalCoordinate>) -> Result<Self> {
        let p = coords.len();
        let n = rows.len();
        let mut values = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(EsrError::InvalidParameter(format!(
                    "row of length {} for {p} coordinates",
                    row.len()
                )));
            }
            values.extend(row);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EsrError::InvalidParameter("non-finite intensity".into()));
        }
        Ok(PixelFeatureMatrix { n, p, values, coords })
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_pixels(&self) -> usize {
        self.p
    }

    pub fn coords(&self) -> &[LocalCoordinate] {
        &self.coords
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p.max(1)).take(self.n)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }
}

/// Fills `out` with the intensities at `coords` for one sample, given the
/// inverse of its normalizing transform.
pub fn sample_pixels(
    image: &Image,
    shape: &Shape,
    to_image: &SimilarityTransform,
    coords: &[LocalCoordinate],
    out: &mut [f64],
) -> Result<()> {
    for (slot, c) in out.iter_mut().zip(coords) {
        let (lx, ly) = shape.landmark(c.landmark)?;
        let (ox, oy) = to_image.apply_linear(c.dx, c.dy);
        *slot = f64::from(image.get_nearest_clamped(lx + ox, ly + oy));
    }
    Ok(())
}

/// Intensities for a single sample: aligns `shape` to `mean` and samples.
pub fn extract_row(
    image: &Image,
    shape: &Shape,
    coords: &[LocalCoordinate],
    mean: &Shape,
) -> Result<Vec<f64>> {
    let to_image = align_similarity(shape, mean)?.inverse()?;
    let mut row = vec![0.0; coords.len()];
    sample_pixels(image, shape, &to_image, coords, &mut row)?;
    Ok(row)
}

/// Samples every `(image, shape)` pair at `coords`. Rows are computed in
/// parallel and assembled in input order.
pub fn extract_shape_indexed_pixels(
    samples: &[(&Image, &Shape)],
    coords: &[LocalCoordinate],
    mean: &Shape,
) -> Result<PixelFeatureMatrix> {
    for (_, s) in samples {
        mean.check_conformable(s)?;
    }
    let rows = samples
        .par_iter()
        .map(|(img, s)| extract_row(img, s, coords, mean))
        .collect::<Result<Vec<_>>>()?;
    PixelFeatureMatrix::from_rows(rows, coords.to_vec())
}

/// Column `m` minus column `n`.
pub fn pixel_difference_feature(rho: &PixelFeatureMatrix, m: usize, n: usize) -> Result<Vec<f64>> {
    for idx in [m, n] {
        if idx >= rho.p {
            return Err(EsrError::ColumnOutOfRange {
                index: idx,
                count: rho.p,
            });
        }
    }
    Ok(rho.rows().map(|r| r[m] - r[n]).collect())
}
