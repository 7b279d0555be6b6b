//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probabilities must be nonnegative and sum to 1 (got sum {sum})")]
    InvalidCategorical { sum: f64 },

    #[error("noise matrix row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("noise matrix entry ({row}, {col}) = {value} outside [0, 1]")]
    MatrixEntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error(
        "impossible observation: p(y'={y_obs} | y={y_true}) = 0 while the posterior \
         places positive mass on class {y_true}"
    )]
    ImpossibleObservation { y_true: usize, y_obs: usize },

    #[error("KL divergence is infinite: p[{index}] = 0 where q[{index}] > 0")]
    InfiniteKl { index: usize },

    #[error("observed class {class} has {available} rows, need {needed} for labeled selection")]
    InsufficientRows {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("non-finite loss at epoch {epoch}: term {term} = {value}")]
    NonFiniteLoss {
        epoch: usize,
        term: &'static str,
        value: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown label {label:?}; known labels: {known:?}")]
    UnknownLabel { label: String, known: Vec<String> },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
