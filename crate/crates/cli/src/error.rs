use std::io;
use std::path::Path;

use thiserror::Error;
use trajcap_core::align::AlignError;
use trajcap_core::conditions::ConditionError;
use trajcap_core::poseio::PoseIoError;
use trajcap_core::simworld::SimError;
use trajcap_core::trajectory::TrajectoryError;

/// Exit code 1 for unreadable or malformed input, 2 for input that parses
/// but violates a domain invariant.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        let what = match err.kind() {
            io::ErrorKind::NotFound => "no such file".to_string(),
            _ => err.to_string(),
        };
        CliError::Input(format!("{}: {what}", path.display()))
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            CliError::Invariant(m) => CliError::Invariant(format!("{}: {m}", path.display())),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<PoseIoError> for CliError {
    fn from(e: PoseIoError) -> Self {
        match e {
            PoseIoError::InvariantViolation(_) | PoseIoError::DuplicateImageName { .. } => {
                CliError::Invariant(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<ConditionError> for CliError {
    fn from(e: ConditionError) -> Self {
        match e {
            ConditionError::TableParse { .. } | ConditionError::UnknownValue { .. } => CliError::Input(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(io) => io.into(),
            SimError::Conditions(c) => c.into(),
            other => CliError::Invariant(other.to_string()),
        }
    }
}
