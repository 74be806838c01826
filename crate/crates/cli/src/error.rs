use std::io;
use std::path::PathBuf;

use batchps_core::{ParamError, SeriesError, SimError, StatsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("series: {0}")]
    Series(#[from] SeriesError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("simulation guard: {capped} of {replications} replications hit the event cap ({fraction:e} > {allowed:e})")]
    EventCapBudget {
        capped: u64,
        replications: u64,
        fraction: f64,
        allowed: f64,
    },
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            // unreadable config files and unwritable output paths are config errors
            CliError::Config(_) | CliError::Params(_) | CliError::Io { .. } | CliError::Csv { .. } | CliError::Json { .. } => 2,
            CliError::Series(_) => 3,
            CliError::Sim(SimError::InvalidConfig(_)) => 2,
            CliError::Sim(_) | CliError::EventCapBudget { .. } | CliError::Stats(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
