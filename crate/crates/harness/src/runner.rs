//! Experiment execution: the single-shot pipeline, the receding-horizon
//! controller, parameter sweeps and the toy-scale oracle comparison.

use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hvac_core::adal::{adal_solve_problem, IterateState, Multipliers, RelaxedSolution, RunOptions, SolverConfig, TraceRow};
use hvac_core::baseline::{
    brute_force_oracle, grid_cell_increment, solve_centralized_nonlinear, solve_centralized_relaxed, BruteForceLimits,
    Method, NonlinearOptions, ReferenceSolution,
};
use hvac_core::model::{bilinear_cooling, build_discrete_dynamics};
use hvac_core::recover::{recover_with, schedule_from_flows, validate_with, RecoverOptions, Schedule};
use hvac_core::relax::{RelaxOptions, RelaxedProblem};
use hvac_core::{Building, Exogenous};

use crate::config::{BaselineSpec, SolverSection};
use crate::scenario::{generate_scenario, GeneratorParams, Scenario};
use crate::HarnessError;

/// Solver and recovery settings shared by every run mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineSettings {
    pub solver: SolverConfig,
    pub recover: RecoverOptions,
}

/// What a reference solver hands back to the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub objective: f64,
    /// Present when the method produces a dynamics-feasible schedule.
    pub schedule: Option<Schedule>,
    /// The objective bounds the true optimum from below.
    pub lower_bound: bool,
    pub diagnostics: serde_json::Value,
}

/// A reference method that can be run next to the decentralized pipeline.
/// Implement this to compare against another scheduler.
pub trait Baseline: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, model: &Building, exo: &Exogenous) -> Result<BaselineResult, String>;
}

fn from_reference(r: ReferenceSolution) -> BaselineResult {
    BaselineResult {
        objective: r.objective,
        lower_bound: r.method == Method::CentralizedRelaxed,
        diagnostics: serde_json::to_value(r.diagnostics).unwrap_or(serde_json::Value::Null),
        schedule: r.schedule,
    }
}

impl Baseline for BaselineSpec {
    fn name(&self) -> String {
        match self {
            BaselineSpec::CentralizedRelaxed { .. } => Method::CentralizedRelaxed,
            BaselineSpec::CentralizedNonlinear { .. } => Method::CentralizedNonlinear,
            BaselineSpec::BruteForce { .. } => Method::BruteForce,
        }
        .tag()
        .to_string()
    }

    fn solve(&self, model: &Building, exo: &Exogenous) -> Result<BaselineResult, String> {
        let r = match self {
            BaselineSpec::CentralizedRelaxed { options } => solve_centralized_relaxed(model, exo, options),
            BaselineSpec::CentralizedNonlinear { options } => solve_centralized_nonlinear(model, exo, options),
            BaselineSpec::BruteForce { resolution, limits } => brute_force_oracle(model, exo, *resolution, *limits),
        };
        r.map(from_reference).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub zones: usize,
    pub horizon: usize,
    pub seed: u64,
    pub edges: usize,
}

impl ScenarioInfo {
    fn of(s: &Scenario) -> Self {
        ScenarioInfo {
            zones: s.n_zones(),
            horizon: s.building.horizon(),
            seed: s.seed,
            edges: s.building.edges().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdalSummary {
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inexact_subproblems: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub cost: f64,
    pub cooling_cost: f64,
    pub fan_cost: f64,
    pub max_comfort_excess: f64,
    pub comfort_violations: usize,
    pub cap_violations: usize,
    pub max_cap_excess: f64,
}

impl ScheduleSummary {
    pub fn of(s: &Schedule) -> Self {
        ScheduleSummary {
            cost: s.cost.total,
            cooling_cost: s.cost.cooling_cost,
            fan_cost: s.cost.fan_cost,
            max_comfort_excess: s.violations.max_comfort_excess,
            comfort_violations: s.violations.comfort.len(),
            cap_violations: s.violations.ahu_cap.len(),
            max_cap_excess: s.violations.max_cap_excess(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub name: String,
    pub ok: bool,
    pub objective: Option<f64>,
    pub lower_bound: bool,
    pub schedule: Option<ScheduleSummary>,
    pub error: Option<String>,
    pub wall_clock_s: f64,
    pub diagnostics: serde_json::Value,
}

/// Relative gaps in percent against the centralized nonlinear cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Gaps {
    pub relaxed_vs_centralized_pct: Option<f64>,
    pub recovered_vs_centralized_pct: Option<f64>,
    pub adal_vs_relaxed_pct: Option<f64>,
    /// relaxed <= centralized <= recovered, up to a relative 1e-9.
    pub ordering_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub scenario: ScenarioInfo,
    pub solver: SolverSection,
    pub adal: AdalSummary,
    pub recovered: ScheduleSummary,
    /// The recovered schedule re-simulates bitwise.
    pub recovered_exact: bool,
    pub baselines: Vec<BaselineSummary>,
    pub gaps: Gaps,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub relaxed: RelaxedSolution,
    pub schedule: Schedule,
    pub baseline_schedules: Vec<(String, Schedule)>,
}

fn pct(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference.abs()
}

fn run_baselines(
    baselines: &[&dyn Baseline],
    model: &Building,
    exo: &Exogenous,
) -> (Vec<BaselineSummary>, Vec<(String, Schedule)>) {
    let mut summaries = Vec::new();
    let mut schedules = Vec::new();
    for b in baselines {
        let clock = Instant::now();
        let name = b.name();
        match b.solve(model, exo) {
            Ok(r) => {
                summaries.push(BaselineSummary {
                    name: name.clone(),
                    ok: true,
                    objective: Some(r.objective),
                    lower_bound: r.lower_bound,
                    schedule: r.schedule.as_ref().map(ScheduleSummary::of),
                    error: None,
                    wall_clock_s: clock.elapsed().as_secs_f64(),
                    diagnostics: r.diagnostics,
                });
                if let Some(s) = r.schedule {
                    schedules.push((name, s));
                }
            }
            Err(e) => {
                warn!("baseline {name} failed: {e}");
                summaries.push(BaselineSummary {
                    name,
                    ok: false,
                    objective: None,
                    lower_bound: false,
                    schedule: None,
                    error: Some(e),
                    wall_clock_s: clock.elapsed().as_secs_f64(),
                    diagnostics: serde_json::Value::Null,
                });
            }
        }
    }
    (summaries, schedules)
}

fn gaps(baselines: &[BaselineSummary], adal_objective: f64, recovered: f64) -> Gaps {
    let find = |m: Method| {
        baselines
            .iter()
            .find(|b| b.ok && b.name == m.tag())
            .and_then(|b| b.objective)
    };
    let relaxed = find(Method::CentralizedRelaxed);
    let central = find(Method::CentralizedNonlinear);
    let ordering = match (relaxed, central) {
        (Some(r), Some(c)) => {
            let slack = 1e-9 * c.abs().max(1.0);
            Some(r <= c + slack && c <= recovered + slack)
        }
        _ => None,
    };
    Gaps {
        relaxed_vs_centralized_pct: relaxed.zip(central).map(|(r, c)| pct(c, r).abs()),
        recovered_vs_centralized_pct: central.map(|c| pct(recovered, c)),
        adal_vs_relaxed_pct: relaxed.map(|r| pct(adal_objective, r)),
        ordering_holds: ordering,
    }
}

/// Decentralized solve, feasibility recovery and validation over the whole
/// horizon, plus the given reference solvers.
pub fn run_single_shot(
    scenario: &Scenario,
    settings: &PipelineSettings,
    baselines: &[&dyn Baseline],
) -> Result<RunArtifacts, HarnessError> {
    let (model, exo) = (&scenario.building, &scenario.exogenous);
    let problem = RelaxedProblem::new(model, exo, RelaxOptions::default())?;
    let clock = Instant::now();
    let (_, relaxed) = adal_solve_problem(&problem, &settings.solver, RunOptions::default())?;
    let adal_time = clock.elapsed().as_secs_f64();
    let mut warnings = Vec::new();
    if !relaxed.converged {
        let msg = format!(
            "decentralized solver stopped at the iteration cap with residual {:.3e}; the best iterate is used",
            relaxed.residual
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let schedule = recover_with(&relaxed, model, exo, settings.recover)?;
    let recovered_exact = validate_with(&schedule, model, exo, settings.recover.tolerance).is_ok();
    if !recovered_exact {
        warnings.push("recovered schedule does not re-simulate exactly".into());
    }
    if !schedule.violations.is_feasible() {
        warnings.push(format!(
            "recovered schedule leaves the comfort band by up to {:.4} degC at {} points and exceeds the AHU cap at {} stages",
            schedule.violations.max_comfort_excess,
            schedule.violations.comfort.len(),
            schedule.violations.ahu_cap.len()
        ));
    }
    let (baseline_summaries, baseline_schedules) = run_baselines(baselines, model, exo);
    let gaps = gaps(&baseline_summaries, relaxed.objective, schedule.cost.total);
    let summary = RunSummary {
        mode: "single-shot".into(),
        scenario: ScenarioInfo::of(scenario),
        solver: SolverSection::from(&settings.solver),
        adal: AdalSummary {
            objective: relaxed.objective,
            residual: relaxed.residual,
            iterations: relaxed.iterations,
            converged: relaxed.converged,
            inexact_subproblems: relaxed.inexact_subproblems,
            wall_clock_s: adal_time,
        },
        recovered: ScheduleSummary::of(&schedule),
        recovered_exact,
        baselines: baseline_summaries,
        gaps,
        warnings,
    };
    Ok(RunArtifacts {
        summary,
        relaxed,
        schedule,
        baseline_schedules,
    })
}

/// One controller step of the receding-horizon run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcStep {
    pub stage: usize,
    /// Stages in the plan solved at this step.
    pub window: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub solve_s: f64,
    /// The previous plan, shifted, was applied instead of a new solve.
    pub fallback: bool,
    pub applied_flows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSummary {
    pub mode: String,
    pub scenario: ScenarioInfo,
    pub solver: SolverSection,
    pub planning_horizon: usize,
    pub realized: ScheduleSummary,
    pub fallbacks: usize,
    pub total_iterations: usize,
    pub total_solve_s: f64,
    pub avg_solve_s_per_stage: f64,
    pub avg_solve_s_per_zone_stage: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MpcArtifacts {
    pub summary: MpcSummary,
    pub realized: Schedule,
    pub steps: Vec<MpcStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MpcOptions {
    pub planning_horizon: usize,
    /// Start each solve from the previous iterate shifted by one stage.
    pub warm_start: bool,
}

impl MpcOptions {
    pub fn new(planning_horizon: usize) -> Self {
        MpcOptions {
            planning_horizon,
            warm_start: true,
        }
    }
}

fn shift_series(v: &[f64], len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().skip(1).copied().take(len).collect();
    let last = out.last().copied().or(v.last().copied()).unwrap_or(0.0);
    out.resize(len, last);
    out
}

/// The previous iterate advanced by one stage and fitted to `len` stages.
fn shifted_state(prev: &IterateState, len: usize, temps_now: &[f64]) -> IterateState {
    let mut agents = prev.agents.clone();
    for (a, &t0) in agents.iter_mut().zip(temps_now) {
        a.temps = shift_series(&a.temps, len);
        a.flows = shift_series(&a.flows, len);
        a.x_cool = shift_series(&a.x_cool, len);
        a.temps[0] = t0;
    }
    let rows = len.saturating_sub(1);
    let mut coordinator = prev.coordinator.clone();
    coordinator.y_total = shift_series(&coordinator.y_total, len);
    IterateState {
        agents,
        coordinator,
        s1: shift_series(&prev.s1, len),
        s2: shift_series(&prev.s2, len),
        multipliers: Multipliers {
            lambda: prev.multipliers.lambda.iter().map(|l| shift_series(l, rows)).collect(),
            gamma: shift_series(&prev.multipliers.gamma, len),
            eta: shift_series(&prev.multipliers.eta, len),
        },
        iteration: 0,
        residual_history: Vec::new(),
    }
}

/// Model predictive control over the scenario's full horizon: at each stage
/// plan `planning_horizon` stages ahead (fewer near the end) from the
/// realized state, apply the first recovered controls to the exact
/// dynamics, and move on.
pub fn run_receding_horizon(
    scenario: &Scenario,
    settings: &PipelineSettings,
    options: MpcOptions,
) -> Result<MpcArtifacts, HarnessError> {
    let (model, exo) = (&scenario.building, &scenario.exogenous);
    let total = model.horizon();
    let h = options.planning_horizon;
    if h == 0 || h > total {
        return Err(HarnessError::Invalid(format!(
            "planning horizon {h} must lie in 1..={total}"
        )));
    }
    let n = model.n_zones();
    let dynamics = build_discrete_dynamics(model, exo)?;
    let mut temps = model.initial_temps();
    let mut applied = vec![Vec::with_capacity(total); n];
    let mut steps = Vec::with_capacity(total);
    let mut warnings = Vec::new();
    let mut plan: Option<(Vec<Vec<f64>>, usize)> = None;
    let mut previous: Option<IterateState> = None;

    for k in 0..total {
        let len = h.min(total - k);
        let window_model = model.with_initial_temps(&temps)?.with_horizon(len)?;
        let window_exo = exo.window(k, len)?;
        let clock = Instant::now();
        let problem = RelaxedProblem::new(&window_model, &window_exo, RelaxOptions::default())?;
        let warm = match (&previous, options.warm_start) {
            (Some(prev), true) => Some(shifted_state(prev, len, &temps)),
            _ => None,
        };
        let solved = adal_solve_problem(
            &problem,
            &settings.solver,
            RunOptions {
                warm_start: warm,
                agent_order: None,
            },
        );
        let outcome = match solved {
            Ok((state, sol)) => {
                let schedule = recover_with(&sol, &window_model, &window_exo, settings.recover)?;
                Ok((state, sol, schedule))
            }
            Err(e) => Err(e.to_string()),
        };
        let solve_s = clock.elapsed().as_secs_f64();
        let shifted_plan = plan
            .as_ref()
            .filter(|(p, offset)| p.first().is_some_and(|r| offset + 1 < r.len()))
            .map(|(p, offset)| (p.clone(), offset + 1));
        let (flows, step) = match outcome {
            Ok((state, sol, schedule)) if sol.converged || shifted_plan.is_none() => {
                if !sol.converged {
                    let msg = format!("stage {k}: no convergence (residual {:.3e}) and no plan to fall back on; best iterate applied", sol.residual);
                    warn!("{msg}");
                    warnings.push(msg);
                }
                let flows = schedule.stage_flows(0);
                plan = Some((schedule.flows, 0));
                previous = Some(state);
                (
                    flows,
                    MpcStep {
                        stage: k,
                        window: len,
                        iterations: sol.iterations,
                        converged: sol.converged,
                        residual: sol.residual,
                        solve_s,
                        fallback: false,
                        applied_flows: Vec::new(),
                    },
                )
            }
            other => {
                let (iterations, residual, reason) = match &other {
                    Ok((_, sol, _)) => (sol.iterations, sol.residual, format!("residual {:.3e} above tolerance", sol.residual)),
                    Err(e) => (0, f64::NAN, e.clone()),
                };
                let Some((p, offset)) = shifted_plan else {
                    return Err(HarnessError::Invalid(format!("stage {k}: solver failed ({reason}) with no plan to fall back on")));
                };
                let msg = format!("stage {k}: solver failed ({reason}); applying the previous plan shifted by {offset}");
                warn!("{msg}");
                warnings.push(msg);
                let flows: Vec<f64> = p.iter().map(|r| r[offset]).collect();
                plan = Some((p, offset));
                previous = None;
                (
                    flows,
                    MpcStep {
                        stage: k,
                        window: len,
                        iterations,
                        converged: false,
                        residual,
                        solve_s,
                        fallback: true,
                        applied_flows: Vec::new(),
                    },
                )
            }
        };
        let x: Vec<f64> = flows
            .iter()
            .zip(&temps)
            .map(|(&m, &t)| bilinear_cooling(m, t, exo.t_supply[k]))
            .collect();
        for (row, &m) in applied.iter_mut().zip(&flows) {
            row.push(m);
        }
        if k + 1 < total {
            temps = dynamics.step(&temps, &x, k);
        }
        steps.push(MpcStep {
            applied_flows: flows,
            ..step
        });
    }

    let realized = schedule_from_flows(model, exo, applied)?;
    let total_solve_s: f64 = steps.iter().map(|s| s.solve_s).sum();
    let summary = MpcSummary {
        mode: "receding-horizon".into(),
        scenario: ScenarioInfo::of(scenario),
        solver: SolverSection::from(&settings.solver),
        planning_horizon: h,
        realized: ScheduleSummary::of(&realized),
        fallbacks: steps.iter().filter(|s| s.fallback).count(),
        total_iterations: steps.iter().map(|s| s.iterations).sum(),
        total_solve_s,
        avg_solve_s_per_stage: total_solve_s / total as f64,
        avg_solve_s_per_zone_stage: total_solve_s / (total * n) as f64,
        warnings,
    };
    Ok(MpcArtifacts {
        summary,
        realized,
        steps,
    })
}

/// One cell of a penalty sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCell {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub residual: f64,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Solve the same relaxed problem for every penalty value. Cells run in
/// parallel and come back in input order.
pub fn rho_sweep(scenario: &Scenario, base: &SolverConfig, rhos: &[f64]) -> Result<Vec<RhoCell>, HarnessError> {
    let problem = RelaxedProblem::new(&scenario.building, &scenario.exogenous, RelaxOptions::default())?;
    rhos.par_iter()
        .map(|&rho| {
            let config = SolverConfig { rho, ..base.clone() };
            let clock = Instant::now();
            let (_, sol) = adal_solve_problem(&problem, &config, RunOptions::default())?;
            Ok(RhoCell {
                rho,
                iterations: sol.iterations,
                converged: sol.converged,
                objective: sol.objective,
                residual: sol.residual,
                wall_clock_s: clock.elapsed().as_secs_f64(),
                trace: sol.trace,
            })
        })
        .collect()
}

/// One cell of a zone-count sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneCell {
    pub zones: usize,
    pub seed: u64,
    /// Planning horizon when run under receding-horizon control.
    pub planning_horizon: Option<usize>,
    pub solves: usize,
    pub total_solve_s: f64,
    pub avg_solve_s: f64,
    pub avg_solve_s_per_zone: f64,
    pub avg_iterations: f64,
    pub cost: f64,
    pub max_comfort_excess: f64,
}

/// Run the pipeline for each zone count on generated scenarios. Cells run
/// one after another so their timings do not compete for the worker pool.
pub fn zone_sweep(
    zones: &[usize],
    seed: u64,
    params: &GeneratorParams,
    settings: &PipelineSettings,
    planning_horizon: Option<usize>,
) -> Result<Vec<ZoneCell>, HarnessError> {
    zones
        .iter()
        .map(|&n| {
            let scenario = generate_scenario(n, seed, params)?;
            match planning_horizon {
                Some(h) => {
                    let run = run_receding_horizon(&scenario, settings, MpcOptions::new(h))?;
                    let solves = run.steps.len();
                    Ok(ZoneCell {
                        zones: n,
                        seed,
                        planning_horizon: Some(h),
                        solves,
                        total_solve_s: run.summary.total_solve_s,
                        avg_solve_s: run.summary.avg_solve_s_per_stage,
                        avg_solve_s_per_zone: run.summary.avg_solve_s_per_zone_stage,
                        avg_iterations: run.summary.total_iterations as f64 / solves as f64,
                        cost: run.realized.cost.total,
                        max_comfort_excess: run.realized.violations.max_comfort_excess,
                    })
                }
                None => {
                    let run = run_single_shot(&scenario, settings, &[])?;
                    let t = run.summary.adal.wall_clock_s;
                    Ok(ZoneCell {
                        zones: n,
                        seed,
                        planning_horizon: None,
                        solves: 1,
                        total_solve_s: t,
                        avg_solve_s: t,
                        avg_solve_s_per_zone: t / n as f64,
                        avg_iterations: run.summary.adal.iterations as f64,
                        cost: run.schedule.cost.total,
                        max_comfort_excess: run.schedule.violations.max_comfort_excess,
                    })
                }
            }
        })
        .collect()
}

/// Summary of a sweep; either list may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mode: String,
    pub scenario: Option<ScenarioInfo>,
    pub solver: SolverSection,
    pub rho_cells: Vec<RhoCell>,
    pub zone_cells: Vec<ZoneCell>,
}

impl SweepSummary {
    pub fn new(scenario: Option<&Scenario>, solver: &SolverConfig) -> Self {
        SweepSummary {
            mode: "sweep".into(),
            scenario: scenario.map(ScenarioInfo::of),
            solver: SolverSection::from(solver),
            rho_cells: Vec::new(),
            zone_cells: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub mode: String,
    pub scenario: ScenarioInfo,
    pub resolution: f64,
    pub oracle_cost: f64,
    pub schedules_evaluated: u64,
    pub centralized_cost: Option<f64>,
    /// Cost change of moving every flow by one grid step at the oracle's
    /// schedule, to first order.
    pub grid_cell_increment: f64,
    pub centralized_within_cell: Option<bool>,
    pub recovered_cost: f64,
    pub recovered_vs_oracle_pct: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OracleArtifacts {
    pub summary: OracleSummary,
    pub oracle: Schedule,
}

/// Compare the brute-force grid optimum with the centralized nonlinear
/// reference and the recovered decentralized schedule on a toy instance.
pub fn run_oracle(
    scenario: &Scenario,
    settings: &PipelineSettings,
    resolution: f64,
    limits: BruteForceLimits,
) -> Result<OracleArtifacts, HarnessError> {
    let (model, exo) = (&scenario.building, &scenario.exogenous);
    let oracle = brute_force_oracle(model, exo, resolution, limits)?;
    let schedule = oracle
        .schedule
        .ok_or_else(|| HarnessError::Invalid("oracle returned no schedule".into()))?;
    let increment = grid_cell_increment(model, exo, &schedule.flows, resolution)?;
    let mut warnings = Vec::new();
    let central = match solve_centralized_nonlinear(model, exo, &NonlinearOptions::default()) {
        Ok(r) => Some(r.objective),
        Err(e) => {
            warnings.push(format!("centralized nonlinear reference failed: {e}"));
            None
        }
    };
    let problem = RelaxedProblem::new(model, exo, RelaxOptions::default())?;
    let (_, relaxed) = adal_solve_problem(&problem, &settings.solver, RunOptions::default())?;
    if !relaxed.converged {
        warnings.push(format!("decentralized solver did not converge (residual {:.3e})", relaxed.residual));
    }
    let recovered = recover_with(&relaxed, model, exo, settings.recover)?;
    let summary = OracleSummary {
        mode: "oracle".into(),
        scenario: ScenarioInfo::of(scenario),
        resolution,
        oracle_cost: oracle.objective,
        schedules_evaluated: oracle.diagnostics.evaluated,
        centralized_cost: central,
        grid_cell_increment: increment,
        centralized_within_cell: central.map(|c| (c - oracle.objective).abs() <= increment + 1e-12),
        recovered_cost: recovered.cost.total,
        recovered_vs_oracle_pct: pct(recovered.cost.total, oracle.objective),
        warnings,
    };
    Ok(OracleArtifacts {
        summary,
        oracle: schedule,
    })
}
