use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("feature index {index} out of range for {n} features")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("record is missing field `{0}`")]
    MissingField(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dataset contains a single class; both labels are required")]
    SingleClass,

    #[error("operation requires variant {expected}, model is {actual}")]
    WrongVariant {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("backprop called without a recorded forward pass for this sample")]
    NoForward,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
