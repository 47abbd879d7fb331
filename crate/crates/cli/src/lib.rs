//! Command implementations behind the `emato` binary.

pub mod acceptance;
pub mod check;
pub mod fit;
pub mod io;
pub mod matrix;
pub mod run;

use std::fmt;

/// Failure of a command, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, flag value or input file (exit code 2).
    Config(String),
    /// A scenario or validation suite failed while running (exit code 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Classifies a library error raised while executing a command.
    pub fn from_run(e: emato::Error) -> Self {
        match e {
            emato::Error::InvalidSpec(_) | emato::Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
