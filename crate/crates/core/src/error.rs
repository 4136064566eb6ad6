use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the TGP library.
#[derive(Debug, Error)]
pub enum TgpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("size limit exceeded: {requested} entries requested, limit is {limit}")]
    SizeLimit { requested: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("kernel matrix is not positive definite (last jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model file: {0}")]
    Format(String),
}

impl TgpError {
    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        TgpError::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TgpError::InvalidArgument(msg.into())
    }

    /// True for failures that come from the numerics rather than from input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TgpError::IllConditioned { .. } | TgpError::Diverged(_) | TgpError::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, TgpError>;
