use std::fmt;
use std::path::Path;

/// Failure of a subcommand, mapped to the exit code contract:
/// 1 usage, 2 data or validation, 3 internal.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    /// Data error naming the offending file.
    pub fn file(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
