use std::fmt;
use std::path::{Path, PathBuf};

use zorro_core::Error;

/// Failure of a subcommand; each category maps to its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Arguments that parse but make no sense together.
    Usage(String),
    /// An input file that cannot be read.
    Missing { path: PathBuf, source: std::io::Error },
    Core(Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Missing { .. } => 3,
            CliError::Core(e) => match e {
                Error::Io(_) => 3,
                Error::Parse { .. }
                | Error::Json(_)
                | Error::Version { .. }
                | Error::Dimension(_)
                | Error::Inconsistent(_)
                | Error::NodeOutOfRange { .. } => 4,
                Error::InvalidParameter(_) | Error::UnsupportedModel(_) | Error::EmptyPool(_) => 5,
                Error::TrainingDiverged { .. }
                | Error::ExplanationIncomplete { .. }
                | Error::Undefined(_)
                | Error::EnumerationBudget { .. } => 6,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Missing { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

/// Fails with a missing-file error unless `path` exists.
pub fn require_file(path: &Path) -> CliResult<()> {
    match std::fs::metadata(path) {
        Ok(_) => Ok(()),
        Err(source) => Err(CliError::Missing {
            path: path.to_path_buf(),
            source,
        }),
    }
}
