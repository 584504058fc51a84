use thiserror::Error;

/// Failures surfaced to the shell, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Well-formed input that the model rejects.
    #[error("validation error: {0}")]
    Validation(String),
    /// Input that could not be read or tokenized.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Parse(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<kslab::Error> for CliError {
    fn from(e: kslab::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Exit code when the invariant suite reports failures.
pub const EXIT_INVARIANT: i32 = 2;
