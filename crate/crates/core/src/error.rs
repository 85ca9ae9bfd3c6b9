use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hypothesis bitmask {0:#x} has bits outside the frame")]
    InvalidHypothesis(u8),

    #[error("the empty set is not a valid evidence hypothesis")]
    EmptyHypothesis,

    #[error("invalid mass function: {0}")]
    InvalidMass(String),

    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid geometries differ")]
    GeometryMismatch,

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("observation at t={got} precedes previous observation at t={previous}")]
    UnsortedTimestamps { previous: f64, got: f64 },

    #[error("{0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message} (at byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("timestamp mismatch: {0}")]
    TimestampMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
