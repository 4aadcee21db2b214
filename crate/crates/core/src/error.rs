use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("out-of-order transaction {tx_id}: timestamp {timestamp} precedes profile's last {last}")]
    Ordering { tx_id: u64, timestamp: u64, last: u64 },

    #[error("non-finite value in field `{0}`")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fuzzy input for variable `{0}` is missing")]
    MissingVariable(String),

    #[error("rule base coverage violated: no rule fires for the given input")]
    CoverageViolation,

    #[error("chain error at block {index}: {reason}")]
    Chain { index: u64, reason: String },

    #[error("authorization error at block {index}: {reason}")]
    Authorization { index: u64, reason: String },

    #[error("{path}: line {line}: {message}")]
    Csv { path: PathBuf, line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("metric `{0}` is undefined (zero denominator)")]
    UndefinedMetric(&'static str),

    #[error("transaction {0} has no ground-truth label")]
    MissingLabel(u64),

    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Error::File { path, source }
    }
}
