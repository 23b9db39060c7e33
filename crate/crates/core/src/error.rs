//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by snapshot ingestion, operator construction, and the
/// derived observables.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite {0}")]
    NonFinite(String),

    #[error("degenerate bandwidth: median pairwise squared distance is zero")]
    DegenerateBandwidth,

    #[error("self-loop removal left degenerate rows (off-diagonal mass below floor): {0:?}")]
    DegenerateRows(Vec<usize>),

    #[error("class {0} has fewer than {1} point(s)")]
    ClassTooSmall(usize, usize),

    #[error("eigensolve failed: {0}")]
    Eigensolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;
