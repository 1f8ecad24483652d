use thiserror::Error;

/// Errors surfaced by the command-line front end, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Exit code 3.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<daim_core::Error> for CliError {
    fn from(e: daim_core::Error) -> Self {
        use daim_core::Error as E;
        match e {
            E::DegenerateIterate(_) | E::AllInitializationsDegenerate(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_failure(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}
