//! Explicit shape regression.
//!
//! Landmark shapes are refined by a cascade of stage regressors. Each stage
//! samples image intensities at offsets attached to the current landmarks,
//! thresholds pixel differences with random ferns, and adds the ferns' outputs
//! to the shape in the frame of the mean shape.
//!
//! ```no_run
//! use esr::cascade::{predict, train, InitSet, TestParams, TrainParams};
//! use esr::dataio::{generate_synthetic, SynthConfig};
//! use rand::SeedableRng;
//!
//! let data = generate_synthetic(&SynthConfig::default()).unwrap();
//! let labeled: Vec<_> = data.iter().map(|s| (&s.image, &s.shape)).collect();
//! let init = InitSet::new(data.iter().map(|s| s.shape.clone()).collect()).unwrap();
//! let params = TrainParams { t_stages: 5, k_ferns: 50, p_pixels: 100, ..TrainParams::default() };
//! let model = train(&labeled, &params, &init).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let shape = predict(&model, &data[0].image, data[0].face_box.as_ref(), &TestParams::default(), &init, &mut rng);
//! ```

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod dataio;
pub mod error;
pub mod features;
pub mod fern;
pub mod geometry;
pub mod matrix;
pub mod selection;

pub use cascade::{EsrModel, InitSet, StageRegressor, TestParams, TrainParams};
pub use error::{EsrError, Result};
pub use geometry::{BoundingBox, Shape, SimilarityTransform};
