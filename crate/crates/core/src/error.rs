use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes of the stream format; each maps to its own error kind.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected \"DNV1\"")]
    BadMagic,
    #[error("truncated stream: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("dimension overflow: {width}x{height}x{frames} frames does not fit in memory")]
    DimensionOverflow { width: u32, height: u32, frames: u32 },
    #[error("unknown frame kind byte {0}")]
    UnknownKind(u8),
    #[error("zero-sized frame dimensions {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },
    #[error("stream holds {found} frames but {expected} were requested")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("trailing {0} bytes after the last frame")]
    TrailingBytes(u64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {key}: {message}")]
    Config { key: String, message: String },
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(#[from] FormatError),
    #[error("path generation failed for seed {seed} after {attempts} attempts")]
    Generation { seed: u64, attempts: u32 },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
