use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fingerprint pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown dataset '{name}'; known datasets: {known}")]
    UnknownDataset { name: String, known: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label (building {building:?}, floor {floor}) is not in the class codebook")]
    UnseenLabel { building: Option<u32>, floor: u32 },

    #[error("no detected RSS value in training data")]
    NoSignal,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("model has no quantized weights")]
    NotQuantized,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Singular => "singular",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::UnknownDataset { .. } => "unknown_dataset",
            Error::Config(_) => "config",
            Error::UnseenLabel { .. } => "unseen_label",
            Error::NoSignal => "no_signal",
            Error::Empty(_) => "empty",
            Error::NotQuantized => "not_quantized",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
