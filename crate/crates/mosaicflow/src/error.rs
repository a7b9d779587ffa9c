//! Crate-wide error type and result alias.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A geometric query left its admissible domain (e.g. arclength out of
    /// range, point outside a genome).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated an operation's precondition (shape mismatch, empty
    /// batch, grid too small, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data failed validation (non-finite values, malformed records).
    #[error("invalid data: {0}")]
    Data(String),

    /// An iterative or factorization step failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Training hit a non-finite loss; carries the point of failure.
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}, lr {lr:e}")]
    TrainDiverged { epoch: usize, batch: usize, lr: f64 },

    /// A serialized artifact (checkpoint, dataset) is corrupt or has an
    /// incompatible version/shape.
    #[error("format error: {0}")]
    Format(String),

    /// Run configuration is invalid; the message names the offending key.
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code contract: 0 success, 2 config, 3 I/O, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::Data(_) => 2,
            Error::Io { .. } => 3,
            Error::Numerical(_) | Error::TrainDiverged { .. } => 4,
            Error::Format(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
