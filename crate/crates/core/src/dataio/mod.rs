//! Images, landmark and model files, evaluation, and the synthetic dataset.

pub mod eval;
pub mod image;
pub mod landmarks;
pub mod model_io;
pub mod synth;

pub use eval::{
    alignment_error, evaluate, evaluate_mean_shape_baseline, evaluate_shapes, format_report, median,
    predict_all, EvalConfig, EvalReport,
};
pub use image::{load_image, save_pgm, save_ppm, Image, RgbImage};
pub use landmarks::{
    list_dataset, load_dataset, load_landmarks, save_landmarks, DatasetEntry, Landmarks, LoadedSample,
};
pub use model_io::{load_model, save_model};
pub use synth::{generate_synthetic, generate_synthetic_dataset, SynthConfig};
