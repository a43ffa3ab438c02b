use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

pub type ReliabilityResult<T> = Result<T, ReliabilityError>;
