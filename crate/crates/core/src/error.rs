use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension error: index {index} out of range for length {len}")]
    Dimension { index: usize, len: usize },

    #[error("invalid pair reference: {0}")]
    Reference(String),

    #[error("pool exhausted: requested {requested} more pairs but only {available} remain")]
    PoolExhausted { requested: u64, available: u64 },

    #[error("problem too large: {pairs} pairs exceeds the cap of {cap}")]
    Size { pairs: u64, cap: u64 },

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
