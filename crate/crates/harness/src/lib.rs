//! Experiment harness for `hvac-core`: seeded scenarios, single-shot and
//! receding-horizon runs, parameter sweeps, reference comparisons and
//! machine-readable reports.

pub mod commands;
pub mod config;
pub mod golden;
pub mod report;
pub mod runner;
pub mod scenario;

use std::path::{Path, PathBuf};

use thiserror::Error;

use hvac_core::adal::AdalError;
use hvac_core::baseline::BaselineError;
use hvac_core::model::ModelError;
use hvac_core::recover::RecoverError;
use hvac_core::relax::RelaxError;

pub use config::{BaselineSpec, ExperimentSpec, Mode, ScenarioSource, SolverSection, SweepSection};
pub use runner::{
    run_oracle, run_receding_horizon, run_single_shot, rho_sweep, zone_sweep, Baseline, BaselineResult, MpcOptions,
    PipelineSettings, RunSummary,
};
pub use scenario::{generate_scenario, GeneratorParams, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Adal(#[from] AdalError),
    #[error(transparent)]
    Recover(#[from] RecoverError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("summary does not match its schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
