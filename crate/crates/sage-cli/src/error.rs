use thiserror::Error;

/// CLI failure, split by the exit code the binary should report: usage and
/// configuration problems exit 2, a failed run-time check exits 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Check(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json: {e}"))
    }
}

impl From<sage_core::CoreError> for CliError {
    fn from(e: sage_core::CoreError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<sage_tools::ToolError> for CliError {
    fn from(e: sage_tools::ToolError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<sage_agent::AgentError> for CliError {
    fn from(e: sage_agent::AgentError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<sage_reliability::ReliabilityError> for CliError {
    fn from(e: sage_reliability::ReliabilityError) -> Self {
        CliError::Usage(e.to_string())
    }
}
