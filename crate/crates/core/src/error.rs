use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the regression pipeline.
#[derive(Debug, Error)]
pub enum EsrError {
    #[error("degenerate shape: landmarks have zero spread")]
    DegenerateShape,

    #[error("degenerate transform: a^2 + b^2 must be positive")]
    DegenerateTransform,

    #[error("shape mismatch: expected {expected} landmarks, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("landmark index {index} out of range for {n_fp} landmarks")]
    LandmarkOutOfRange { index: usize, n_fp: usize },

    #[error("column index {index} out of range for {count} columns")]
    ColumnOutOfRange { index: usize, count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate feature: pixel-difference range is zero")]
    DegenerateFeature,

    #[error("feature selection failed: every candidate pixel pair has zero variance or the projected target is constant")]
    NoValidCandidate,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EsrError {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        EsrError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EsrError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, EsrError>;
