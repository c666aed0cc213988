use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid tuple: {0}")]
    InvalidTuple(String),

    #[error("rank {rank} out of range for {n_p} ranks")]
    RankOutOfRange { rank: usize, n_p: usize },

    #[error("invalid input value {value} at field {field}, vector {vector}: elements must be finite and nonnegative")]
    InvalidElement { field: usize, vector: usize, value: f64 },

    #[error("{path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("duplicate tuple id with canonical index {0}")]
    DuplicateTuple(u64),

    #[error("position {position} out of range: rank {rank} owns {owned} tuples")]
    PositionOutOfRange {
        rank: usize,
        position: usize,
        owned: usize,
    },

    #[error("transport: {0}")]
    Transport(String),

    #[error("rank {rank} timed out after {secs:.1}s waiting for message from rank {source_rank} (phase {phase}, step {step})")]
    Timeout {
        rank: usize,
        source_rank: usize,
        phase: u32,
        step: u32,
        secs: f64,
    },

    #[error("run aborted because another rank failed")]
    Aborted,

    #[error("rank {rank} failed: {source}")]
    Worker {
        rank: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rank {rank} panicked: {message}")]
    WorkerPanic { rank: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Rank of the worker that failed, if this error came out of a run.
    pub fn failed_rank(&self) -> Option<usize> {
        match self {
            Error::Worker { rank, .. } | Error::WorkerPanic { rank, .. } => Some(*rank),
            _ => None,
        }
    }
}
