use std::path::PathBuf;

/// Errors produced by the edge-detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate neighborhood: {0}")]
    DegenerateNeighborhood(String),

    #[error("insufficient neighborhood: need {needed} points, have {available}")]
    InsufficientNeighborhood { needed: usize, available: usize },

    #[error("duplicate point: {index} coincides with {other}")]
    DuplicatePoint { index: usize, other: usize },

    #[error("model shape mismatch: {0}")]
    ModelShape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty edge set in {0} cloud")]
    EmptyEdgeSet(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
