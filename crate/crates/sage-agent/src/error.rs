use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("nothing to critique: the trajectory succeeded")]
    CritiqueOfSuccess,
    #[error("no correction available: {0}")]
    CorrectionUnavailable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error(transparent)]
    Core(#[from] sage_core::CoreError),
    #[error(transparent)]
    Tool(#[from] sage_tools::ToolError),
}

pub type AgentResult<T> = Result<T, AgentError>;
