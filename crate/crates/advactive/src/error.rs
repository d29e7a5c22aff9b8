//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid experiment or dataset configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed input bytes (IDX files, CSV), with the offending byte offset.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    /// SVM training failed (degenerate input or non-convergence).
    #[error("training error: {0}")]
    Training(String),
    /// An argument violated an operation's contract (dimensions, emptiness, non-finite values).
    #[error("validation error: {0}")]
    Validation(String),
    /// A selection strategy could not produce a candidate.
    #[error("selection error: {0}")]
    Selection(String),
    /// Sigmoid calibration failed.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// The labeling oracle could not be constructed.
    #[error("oracle construction error: {0}")]
    Oracle(String),
    /// Filesystem failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Metadata (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an `io::Error` together with the path that produced it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
