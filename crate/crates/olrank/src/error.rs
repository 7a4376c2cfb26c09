//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset loading, model training, and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in a LETOR/SVMLight file or a config file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input violated a documented invariant (label range, qid grouping, ...).
    #[error("invalid data: {0}")]
    Validation(String),

    /// A vector had the wrong length for the network or state it was fed to.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation that needs at least one query session got none.
    #[error("empty dataset")]
    EmptyDataset,

    /// Gradient descent produced a NaN or infinite loss.
    #[error("non-finite loss at gradient step {step}")]
    NonFiniteLoss { step: usize },

    /// The certain-order graph contained a cycle; this indicates an internal
    /// invariant violation since every edge requires a strict score gap.
    #[error("cycle detected in certain-order graph")]
    CycleDetected,

    /// A caller-supplied argument was out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An experiment config was missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A module error with the online round it occurred in attached.
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    /// File I/O failure with the offending path.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps any error with the online round index it occurred in.
    pub fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
