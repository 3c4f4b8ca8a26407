//! Experiment runner: configuration, task execution, parameter sweeps, and
//! CSV reports.

pub mod config;
pub mod report;
pub mod runner;

use std::path::Path;

pub use config::ExperimentConfig;
pub use report::{cmd_report, CostAxis, ReportOptions};
pub use runner::{cmd_run, cmd_sweep, RunOptions, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The config file or command line is invalid.
    #[error("config error: {0}")]
    Config(String),
    /// An input file is missing or malformed.
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 for configuration errors, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}
