//! Experiment configuration, orchestration and CSV output.
//!
//! A configuration file selects one experiment kind; [`run_experiment`]
//! runs it and returns a [`ResultBundle`] of CSV tables, a cost summary and
//! an echo of the configuration that reproduces the run.

mod config;
mod output;
mod report;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_config, parse_config_with_overrides, ConfigError, ExperimentConfig, ExperimentKind, COMPARE_DEFAULT_STEPS, KEYS};
pub use output::{emit_csv, opt_real, read_csv, real, CsvTable, TIMING_COLUMNS};
pub use report::{cost_report, CostRole, MethodCost, SummaryRow};
pub use run::{run_experiment, ResultBundle};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Solver { context: String, source: crate::Error },
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn solver(context: impl Into<String>, source: crate::Error) -> Self {
        HarnessError::Solver { context: context.into(), source }
    }
}
