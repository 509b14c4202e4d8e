use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate key {0:?}")]
    DuplicateKey(String),

    #[error("invalid timestamp {value:?} at line {line}")]
    Timestamp { line: u64, value: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} {id:?}")]
    UnknownId { kind: &'static str, id: String },

    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported version {found} in {path}")]
    BadVersion { path: PathBuf, found: u32 },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("sidecar {path} has {found} ids, header says {expected}")]
    SidecarMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("unreachable target: {0}")]
    Unreachable(String),

    #[error("missing prerequisite artifact: {0}")]
    Dependency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
