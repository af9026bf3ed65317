use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: bad dimensions, mismatched lengths, non-finite values.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is well-formed but a statistic is undefined on it
    /// (constant vectors, zero target variance, rank-deficient designs).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A value lies outside the domain of a function, e.g. `ln` of a non-positive ATR.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("{}: row {row}: {message}", path.display())]
    Manifest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by reading, decoding or parsing files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Decode { .. } | Error::Manifest { .. } | Error::Format { .. }
        )
    }
}
