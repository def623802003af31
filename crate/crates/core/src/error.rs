use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate quaternion (norm {norm:e})")]
    DegenerateQuaternion { norm: f64 },

    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: timestamp {t} does not increase past {prev}")]
    Ordering { line: usize, prev: f64, t: f64 },

    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sequence too short: need at least {needed}, got {got}")]
    Length { needed: usize, got: usize },

    #[error("no user has enough recordings for the split ({dropped} users dropped)")]
    EmptyDataset { dropped: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} out of range for {num_users} users")]
    InvalidLabel { label: usize, num_users: usize },

    #[error("degenerate training data: {0}")]
    DegenerateDataset(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
