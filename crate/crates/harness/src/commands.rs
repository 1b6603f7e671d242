//! Runs that write their results to an output directory.
//!
//! Layout of a run directory:
//! - `summary.json`: the run summary, valid against [`SUMMARY_SCHEMA`](crate::report::SUMMARY_SCHEMA)
//! - `experiment.toml`, `scenario.toml`: the resolved inputs
//! - `schedule.csv`: recovered (or realized, or oracle) schedule
//! - `convergence.csv`: per-iteration trace of the decentralized solve
//! - `schedule_<baseline>.csv`: schedules of the reference methods
//! - `mpc_steps.csv`: one row per controller step
//! - `sweep_rho.csv`, `sweep_zones.csv`, `convergence_rho_<rho>.csv`: sweep cells

use std::path::{Path, PathBuf};

use log::info;

use hvac_core::baseline::BruteForceLimits;

use crate::config::{ExperimentSpec, Mode, ScenarioSource};
use crate::report;
use crate::runner::{
    rho_sweep, run_oracle, run_receding_horizon, run_single_shot, zone_sweep, Baseline, MpcOptions, PipelineSettings,
    SweepSummary,
};
use crate::scenario::{GeneratorParams, Scenario};
use crate::HarnessError;

pub const SUMMARY_FILE: &str = "summary.json";

fn settings(spec: &ExperimentSpec) -> PipelineSettings {
    PipelineSettings {
        solver: spec.solver.to_config(),
        recover: spec.recover,
    }
}

fn write_inputs(spec: &ExperimentSpec, scenario: Option<&Scenario>, out: &Path) -> Result<(), HarnessError> {
    report::write_atomic(&out.join("experiment.toml"), spec.to_toml()?.as_bytes())?;
    if let Some(s) = scenario {
        report::write_atomic(&out.join("scenario.toml"), s.to_toml()?.as_bytes())?;
    }
    Ok(())
}

/// Run the experiment described by `spec`. Relative scenario paths resolve
/// against `base`; results go to `out`. Returns the summary path.
pub fn execute(spec: &ExperimentSpec, base: &Path, out: &Path) -> Result<PathBuf, HarnessError> {
    spec.validate()?;
    if !spec.sweep.rho.is_empty() || !spec.sweep.zones.is_empty() {
        return sweep(spec, base, out);
    }
    let scenario = spec.scenario.load(base)?;
    write_inputs(spec, Some(&scenario), out)?;
    match spec.mode {
        Mode::SingleShot => solve(spec, &scenario, out),
        Mode::RecedingHorizon { horizon } => mpc(spec, &scenario, horizon, out),
    }
}

fn solve(spec: &ExperimentSpec, scenario: &Scenario, out: &Path) -> Result<PathBuf, HarnessError> {
    let baselines: Vec<&dyn Baseline> = spec.baselines.iter().map(|b| b as &dyn Baseline).collect();
    let run = run_single_shot(scenario, &settings(spec), &baselines)?;
    report::write_schedule_csv(&out.join("schedule.csv"), &run.schedule, &scenario.exogenous)?;
    report::write_convergence_csv(&out.join("convergence.csv"), &run.relaxed.trace)?;
    for (name, s) in &run.baseline_schedules {
        report::write_schedule_csv(&out.join(format!("schedule_{name}.csv")), s, &scenario.exogenous)?;
    }
    let path = out.join(SUMMARY_FILE);
    report::write_summary(&path, &run.summary)?;
    info!(
        "recovered cost {:.4} after {} iterations (residual {:.3e})",
        run.summary.recovered.cost, run.summary.adal.iterations, run.summary.adal.residual
    );
    Ok(path)
}

fn mpc(spec: &ExperimentSpec, scenario: &Scenario, horizon: usize, out: &Path) -> Result<PathBuf, HarnessError> {
    let run = run_receding_horizon(scenario, &settings(spec), MpcOptions::new(horizon))?;
    report::write_schedule_csv(&out.join("schedule.csv"), &run.realized, &scenario.exogenous)?;
    report::write_mpc_csv(&out.join("mpc_steps.csv"), &run.steps)?;
    let path = out.join(SUMMARY_FILE);
    report::write_summary(&path, &run.summary)?;
    info!(
        "realized cost {:.4}, {} fallbacks, {:.3} s solving",
        run.summary.realized.cost, run.summary.fallbacks, run.summary.total_solve_s
    );
    Ok(path)
}

fn sweep(spec: &ExperimentSpec, base: &Path, out: &Path) -> Result<PathBuf, HarnessError> {
    let settings = settings(spec);
    let scenario = if spec.sweep.rho.is_empty() {
        None
    } else {
        Some(spec.scenario.load(base)?)
    };
    write_inputs(spec, scenario.as_ref(), out)?;
    let mut summary = SweepSummary::new(scenario.as_ref(), &settings.solver);
    if let Some(s) = &scenario {
        summary.rho_cells = rho_sweep(s, &settings.solver, &spec.sweep.rho)?;
        for cell in &summary.rho_cells {
            report::write_convergence_csv(&out.join(report::rho_trace_name(cell.rho)), &cell.trace)?;
        }
        report::write_rho_csv(&out.join("sweep_rho.csv"), &summary.rho_cells)?;
    }
    if !spec.sweep.zones.is_empty() {
        let (seed, params) = match &spec.scenario {
            ScenarioSource::Generate { seed, params, .. } => (*seed, params.clone()),
            ScenarioSource::File { .. } => (0, GeneratorParams::default()),
        };
        let h = match spec.mode {
            Mode::SingleShot => None,
            Mode::RecedingHorizon { horizon } => Some(horizon),
        };
        summary.zone_cells = zone_sweep(&spec.sweep.zones, seed, &params, &settings, h)?;
        report::write_zone_csv(&out.join("sweep_zones.csv"), &summary.zone_cells)?;
    }
    let path = out.join(SUMMARY_FILE);
    report::write_summary(&path, &summary)?;
    Ok(path)
}

/// Brute-force comparison on a toy scenario.
pub fn oracle(
    spec: &ExperimentSpec,
    base: &Path,
    resolution: f64,
    limits: BruteForceLimits,
    out: &Path,
) -> Result<PathBuf, HarnessError> {
    spec.validate()?;
    let scenario = spec.scenario.load(base)?;
    write_inputs(spec, Some(&scenario), out)?;
    let run = run_oracle(&scenario, &settings(spec), resolution, limits)?;
    report::write_schedule_csv(&out.join("schedule.csv"), &run.oracle, &scenario.exogenous)?;
    let path = out.join(SUMMARY_FILE);
    report::write_summary(&path, &run.summary)?;
    Ok(path)
}
