use std::path::PathBuf;

use thiserror::Error;
use tkyweld::geometry::io::IoError;
use tkyweld::kinematics::IkError;
use tkyweld::perception::PerceptionError;
use tkyweld::planners::PlanError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_REGISTRATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] IoError),
    #[error("config: {0}")]
    Config(String),
    #[error("goal '{goal}': {source}")]
    Goal { goal: String, source: IkError },
    #[error("perception: {0}")]
    Perception(PerceptionError),
    #[error("registration failed: {0}")]
    Registration(PerceptionError),
    #[error("planning failed: {0}")]
    Plan(PlanError),
    #[error("segment {0} of the returned path fails re-validation")]
    InvalidPath(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File { .. } | CliError::Format(_) | CliError::Config(_) | CliError::Goal { .. } => EXIT_IO,
            CliError::Perception(_) => EXIT_IO,
            CliError::Registration(_) => EXIT_REGISTRATION,
            CliError::Plan(PlanError::InvalidEndpoint(_)) => EXIT_IO,
            CliError::Plan(_) | CliError::InvalidPath(_) => EXIT_TIMEOUT,
        }
    }
}

pub(crate) fn file_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::File { path, source }
}
