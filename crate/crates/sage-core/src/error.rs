//! Error type shared by the whole crate.

use thiserror::Error;

/// Anything that can go wrong inside the core: bad shapes, bad arguments,
/// malformed persisted state.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("token id {token} out of range for vocab of size {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type CoreResult<T> = Result<T, CoreError>;
