use pipest_core::estimators::EstimationError;
use pipest_core::model::SystemError;
use pipest_core::signal::SignalError;
use pipest_core::synth::SynthError;
use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("workspace violation: {0}")]
    Workspace(String),
    #[error("{0}")]
    Ingest(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Usage(_) => 2,
            Self::Workspace(_) => 3,
            Self::Ingest(_) => 4,
            Self::Solver(_) => 5,
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        Self::Solver(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::WorkspaceViolation { .. } => Self::Workspace(e.to_string()),
            SynthError::InvalidSpec(m) => Self::Usage(m),
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::InvalidWindow { .. } | SignalError::FractionOutOfRange(_) | SignalError::InvalidRate(_) => {
                Self::Usage(e.to_string())
            }
            SignalError::NonUniformRate { index, .. } | SignalError::NonMonotonicTime { index } => {
                Self::Ingest(format!("row {}: {e}", index + 1))
            }
            SignalError::TooFewSamples { .. } => Self::Ingest(e.to_string()),
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        Self::Ingest(e.to_string())
    }
}
