//! Command-line front end: config parsing, presets, dispatch and reports.

pub mod config;
pub mod presets;
pub mod report;
pub mod run;

use std::io;

use thiserror::Error;

use config::ConfigError;
use report::Report;

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;
pub const EXIT_NETWORK: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigError>),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Network(String),
    /// A networked session that ended early; the partial report is kept.
    #[error("session aborted: {reason}")]
    Aborted { reason: String, report: Box<Report> },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Capacity(_) => EXIT_CAPACITY,
            CliError::Network(_) | CliError::Aborted { .. } => EXIT_NETWORK,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<Vec<ConfigError>> for CliError {
    fn from(errors: Vec<ConfigError>) -> Self {
        CliError::Config(errors)
    }
}
