use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label-space error: {0}")]
    LabelSpace(String),

    #[error("schema error: missing columns {missing:?}")]
    Schema { missing: Vec<String> },

    #[error("parse error in row {row}: {message}")]
    Parse { row: String, message: String },

    #[error("degenerate instance {id}: all annotation mass removed by adaptation")]
    DegenerateInstance { id: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("encoder unavailable: {0}")]
    EncoderUnavailable(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("run for seed {seed} failed: {source}")]
    SeedFailed { seed: u64, source: Box<Error> },

    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by the data files rather than the run configuration or the runtime.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::LabelSpace(_)
                | Error::Schema { .. }
                | Error::Parse { .. }
                | Error::DegenerateInstance { .. }
                | Error::InvalidDistribution(_)
                | Error::Csv(_)
        )
    }
}
