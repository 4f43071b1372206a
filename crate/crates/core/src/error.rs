use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the filtering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("patch larger than cloud (K = {k}, N = {n})")]
    PatchLargerThanCloud { k: usize, n: usize },

    #[error("point index {index} out of range for cloud of {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("non-finite coordinate in point {0}")]
    NonFinitePoint(usize),

    #[error("non-finite matrix entry")]
    NonFiniteMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
