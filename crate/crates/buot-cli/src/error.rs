//! CLI error type with categorized exit codes.

use std::fmt;

/// Exit codes: 2 usage (clap), 3 I/O, 4 validation, 5 non-convergence.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 3,
            CliError::Validation(_) => 4,
            CliError::NonConvergence(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(msg) => write!(f, "I/O error: {msg}"),
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::NonConvergence(msg) => write!(f, "non-convergence: {msg}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<buot::SolveError> for CliError {
    fn from(e: buot::SolveError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<buot::GridError> for CliError {
    fn from(e: buot::GridError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<buot::imaging::ImagingError> for CliError {
    fn from(e: buot::imaging::ImagingError) -> Self {
        match e {
            buot::imaging::ImagingError::Pnm(p) => match p {
                buot::imaging::PnmError::Io(io) => CliError::Io(io.to_string()),
                other => CliError::Validation(other.to_string()),
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<buot::oracle::OracleError> for CliError {
    fn from(e: buot::oracle::OracleError) -> Self {
        CliError::Validation(e.to_string())
    }
}
