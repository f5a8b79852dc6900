use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {position} out of range for {len} jobs")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("rejected action ({i}, {k}) for {len} jobs: {reason}")]
    RejectedAction {
        i: usize,
        k: usize,
        len: usize,
        reason: &'static str,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid instance {id}: {summary}")]
    InvalidInstance { id: String, summary: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate probability matrix (total mass {0})")]
    DegenerateDistribution(f64),

    #[error("episode already finished after {0} steps")]
    EpisodeDone(usize),

    #[error("empty instance pool")]
    EmptyPool,

    #[error(
        "brute force refused for {n} jobs (limit {limit}); use a heuristic or a smaller instance"
    )]
    TooLarge { n: usize, limit: usize },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than a fault while running.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidPermutation(_)
                | Error::InvalidInstance { .. }
                | Error::Config(_)
                | Error::Json { .. }
                | Error::TooLarge { .. }
                | Error::Checkpoint(_)
                | Error::EmptyPool
                | Error::Shape(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
