//! Experiment runner for the `gibbsbd-core` simulators: configuration files,
//! parallel replicas, and CSV/JSON reports.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod runner;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, OutputFormat};
pub use experiments::{execute, Check, Outcome, Table};
pub use runner::RayonRunner;

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}
