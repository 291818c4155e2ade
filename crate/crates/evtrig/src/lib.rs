//! File formats and command implementations behind the `evtrig` binary.

pub mod commands;
pub mod config;
pub mod output;

use evtrig_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    GateFailure = 2,
    AcceptanceFailure = 3,
    NumericalFailure = 4,
}

impl RunError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            RunError::Config(_) | RunError::Io(_) | RunError::Csv(_) => ExitStatus::Usage,
            RunError::Core(CoreError::InfeasibleDesign(_)) => ExitStatus::GateFailure,
            RunError::Core(CoreError::InvalidParameter(_) | CoreError::Dimension(_) | CoreError::Structural(_)) => {
                ExitStatus::Usage
            }
            RunError::Core(_) => ExitStatus::NumericalFailure,
        }
    }
}
