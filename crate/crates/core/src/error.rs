use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid mismatch: left has {left} intervals, right has {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid must have at least one interval")]
    EmptyGrid,

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iterate became non-finite at iteration {iteration}")]
    NumericBreakdown { iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
