//! Library side of the `depgrid` command-line tool.
//!
//! Every subcommand is a plain function in [`commands`]; the binary only
//! parses arguments and maps [`CliError`] onto exit codes.

pub mod commands;
pub mod io;
pub mod manifest;
pub mod reproduce;
pub mod svg;

use depgrid_core::{ConfigError, DomainError, EstimatorError, SimError};
use thiserror::Error;

/// Exit code for invalid arguments.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for config parse or validation errors.
pub const EXIT_CONFIG: i32 = 3;
/// Exit code for malformed or inconsistent data files.
pub const EXIT_DATA: i32 = 4;
/// Exit code when a prediction hits untested regions with target mass.
pub const EXIT_EMPTY_PARTITION: i32 = 5;
/// Exit code for I/O failures.
pub const EXIT_IO: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}:{line}: {message}")]
    DataLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Data { path: String, message: String },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Estimator(EstimatorError::EmptyPartition { .. }) => EXIT_EMPTY_PARTITION,
            CliError::DataLine { .. }
            | CliError::Data { .. }
            | CliError::Estimator(_)
            | CliError::Sim(_)
            | CliError::Domain(_) => EXIT_DATA,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
