use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A tensor extent does not fit the operation.
    #[error("{op}: shape mismatch in {dim}: expected {expected}, got {got}")]
    Shape { op: &'static str, dim: String, expected: String, got: String },

    #[error("{op}: axis {axis} out of range for rank {rank}")]
    Axis { op: &'static str, axis: usize, rank: usize },

    #[error("backward: {0}")]
    Backward(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("checksum mismatch for {path}: manifest {expected}, computed {actual}")]
    Checksum { path: PathBuf, expected: String, actual: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, dim: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape { op, dim: dim.into(), expected: expected.to_string(), got: got.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
