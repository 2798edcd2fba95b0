use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature vector must have at least one component")]
    EmptyVector,

    #[error("feature component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid estimation parameters: {0}")]
    InvalidParams(String),

    #[error("phase tag `{0}` is not registered with the ledger")]
    UnregisteredPhase(String),

    #[error("cost counter overflow on {0}")]
    CounterOverflow(String),

    #[error("cannot sample from a store whose rows all have zero norm")]
    ZeroNormStore,

    #[error("at least one labeled point is required to start propagation")]
    NoLabeledSeed,

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
