//! Experiment settings read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hvac_core::adal::{DualStep, SolverConfig, Sweep};
use hvac_core::baseline::{BruteForceLimits, CentralOptions, NonlinearOptions};
use hvac_core::recover::RecoverOptions;

use crate::scenario::{generate_scenario, GeneratorParams, Scenario};
use crate::HarnessError;

/// Where the instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioSource {
    File {
        path: PathBuf,
    },
    Generate {
        zones: usize,
        seed: u64,
        #[serde(default)]
        params: GeneratorParams,
    },
}

impl ScenarioSource {
    /// Resolve the scenario. Relative file paths are taken against `base`.
    pub fn load(&self, base: &Path) -> Result<Scenario, HarnessError> {
        match self {
            ScenarioSource::File { path } => {
                let full = if path.is_relative() { base.join(path) } else { path.clone() };
                let text = std::fs::read_to_string(&full).map_err(|e| HarnessError::io(&full, e))?;
                Ok(Scenario::from_toml(&text)?)
            }
            ScenarioSource::Generate { zones, seed, params } => Ok(generate_scenario(*zones, *seed, params)?),
        }
    }
}

/// ADAL settings. Unset fields take the solver defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub rho: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tau: Option<f64>,
    pub sub_tol: f64,
    pub sub_max_iters: usize,
    pub sweep: Sweep,
    pub dual_step: DualStep,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection::from(&SolverConfig::default())
    }
}

impl From<&SolverConfig> for SolverSection {
    fn from(c: &SolverConfig) -> Self {
        SolverSection {
            rho: c.rho,
            epsilon: c.epsilon,
            max_iters: c.max_iters,
            tau: c.tau,
            sub_tol: c.sub_tol,
            sub_max_iters: c.sub_max_iters,
            sweep: c.sweep,
            dual_step: c.dual_step,
            seed: c.seed,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            tau: self.tau,
            sub_tol: self.sub_tol,
            sub_max_iters: self.sub_max_iters,
            dual_step: self.dual_step,
            sweep: self.sweep,
            seed: self.seed,
        }
    }
}

/// Reference solvers run next to the decentralized pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSpec {
    CentralizedRelaxed {
        #[serde(default = "CentralOptions::default")]
        options: CentralOptions,
    },
    CentralizedNonlinear {
        #[serde(default = "NonlinearOptions::default")]
        options: NonlinearOptions,
    },
    BruteForce {
        #[serde(default = "default_resolution")]
        resolution: f64,
        #[serde(default)]
        limits: BruteForceLimits,
    },
}

fn default_resolution() -> f64 {
    0.025
}

impl BaselineSpec {
    pub fn centralized_relaxed() -> Self {
        BaselineSpec::CentralizedRelaxed {
            options: CentralOptions::default(),
        }
    }

    pub fn centralized_nonlinear() -> Self {
        BaselineSpec::CentralizedNonlinear {
            options: NonlinearOptions::default(),
        }
    }

    pub fn brute_force(resolution: f64) -> Self {
        BaselineSpec::BruteForce {
            resolution,
            limits: BruteForceLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mode {
    #[default]
    SingleShot,
    RecedingHorizon {
        /// Planning horizon in stages.
        horizon: usize,
    },
}

/// Axes of a sweep. Each listed value becomes one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub rho: Vec<f64>,
    pub zones: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSource,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default = "RecoverOptions::default")]
    pub recover: RecoverOptions,
    #[serde(default)]
    pub baselines: Vec<BaselineSpec>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentSpec {
    /// Spec for a generated scenario with default everything else.
    pub fn generated(zones: usize, seed: u64) -> Self {
        ExperimentSpec {
            scenario: ScenarioSource::Generate {
                zones,
                seed,
                params: GeneratorParams::default(),
            },
            solver: SolverSection::default(),
            recover: RecoverOptions::default(),
            baselines: Vec::new(),
            mode: Mode::SingleShot,
            sweep: SweepSection::default(),
            output: default_output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.solver
            .to_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        for rho in &self.sweep.rho {
            if !(*rho > 0.0 && rho.is_finite()) {
                return Err(HarnessError::Config(format!("sweep rho {rho} must be positive")));
            }
        }
        if self.sweep.zones.contains(&0) {
            return Err(HarnessError::Config("sweep zone counts must be positive".into()));
        }
        if let Mode::RecedingHorizon { horizon } = self.mode {
            if horizon == 0 {
                return Err(HarnessError::Config("planning horizon must be positive".into()));
            }
        }
        if !(self.recover.guard >= 0.0) {
            return Err(HarnessError::Config("recovery guard must be nonnegative".into()));
        }
        Ok(())
    }
}
