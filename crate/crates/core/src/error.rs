use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("sampler invariant violated: {0}")]
    InvariantViolation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("feature `{name}` has zero variance over its unmasked values")]
    ZeroVariance { name: String },

    #[error("feature `{name}` has fewer than two usable values")]
    InsufficientData { name: String },

    #[error("unknown column `{name}` in feature config; available columns: {available}")]
    UnknownColumn { name: String, available: String },

    #[error("singular ridge system at lambda = {lambda}; use lambda > 0 for collinear features")]
    SingularSystem { lambda: f64 },

    #[error("no dates in common between the count corpus and the environment table")]
    EmptyAlignment,

    #[error("unsupported format_version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
