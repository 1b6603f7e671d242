//! Decentralized solver for the relaxed problem: an accelerated distributed
//! augmented-Lagrangian scheme.
//!
//! Each iteration the AHU coordinator and then every zone minimize their
//! local augmented Lagrangian. Zones solve in parallel against the same view
//! of the other zones (the previous iterate), move a fraction `tau` towards
//! their minimizers, and the multipliers take a dual ascent step on the
//! coupled residual. A fully Jacobi variant is available through [`Sweep`].

mod coordinator;
mod lagrangian;
mod zone;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BuildingModel, ExogenousSeries};
use crate::relax::{AgentTrajectory, CoordinatorTrajectory, RelaxError, RelaxOptions, RelaxedProblem};
use crate::scalar::Scalar;

pub use coordinator::{solve_coordinator_stage, solve_subproblem_coordinator, CoordinatorSolution};
pub use lagrangian::{
    augmented_lagrangian, residual, residual_vectors, update_multipliers, update_multipliers_with, ResidualParts,
    Residuals,
};
pub use zone::{minimize_zone, SubproblemOptions, ZoneOperator, ZoneQp, ZoneSolve, ZoneSolvers};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdalError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("warm start does not match the problem: {0}")]
    WarmStart(String),
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

/// A zone subproblem that hit its iteration cap.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("zone {zone} subproblem stopped after {iterations} iterations with gradient mapping {gradient_mapping}")]
pub struct SubproblemError<S: Scalar> {
    pub zone: usize,
    pub iterations: usize,
    pub gradient_mapping: S,
    /// Last iterate, feasible for the zone's local set.
    pub best: AgentTrajectory<S>,
}

/// Multipliers of the three coupled constraint families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers<S = f64> {
    /// `[zone][row]` dynamics multipliers.
    pub lambda: Vec<Vec<S>>,
    /// Flow-coupling multipliers per stage.
    pub gamma: Vec<S>,
    /// AHU-cap multipliers per stage.
    pub eta: Vec<S>,
}

impl<S: Scalar> Multipliers<S> {
    pub fn zeros(n_zones: usize, horizon: usize) -> Self {
        Multipliers {
            lambda: vec![vec![S::zero(); horizon.saturating_sub(1)]; n_zones],
            gamma: vec![S::zero(); horizon],
            eta: vec![S::zero(); horizon],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().flatten().chain(&self.gamma).chain(&self.eta).all(|v| v.is_finite())
    }
}

/// Which iterate the zone subproblems read within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    /// The coordinator solves first and adopts its minimizer; the zones then
    /// solve in parallel against the new total flow and slacks and the
    /// previous zone iterate, and move a fraction `tau` towards their
    /// minimizers.
    #[default]
    CoordinatorFirst,
    /// Every agent solves against the previous iterate and every block moves
    /// a fraction `tau`.
    Jacobi,
}

/// How far the multipliers move per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DualStep {
    /// Step `rho`.
    #[default]
    Rho,
    /// Step `rho * tau`.
    RhoTau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<S = f64> {
    pub rho: S,
    /// Stop once the coupled residual falls to this value.
    pub epsilon: S,
    pub max_iters: usize,
    /// Primal relaxation step; `None` picks `1 / (1 + max zone degree)`.
    pub tau: Option<S>,
    pub sub_tol: S,
    pub sub_max_iters: usize,
    pub dual_step: DualStep,
    pub sweep: Sweep,
    /// Seed for randomized components of the surrounding pipeline. The
    /// iteration itself is deterministic.
    pub seed: u64,
}

impl<S: Scalar> Default for SolverConfig<S> {
    fn default() -> Self {
        SolverConfig {
            rho: S::of(15.0),
            epsilon: S::of(1e-2),
            max_iters: 500,
            tau: None,
            sub_tol: S::of(1e-6),
            sub_max_iters: 5000,
            dual_step: DualStep::Rho,
            sweep: Sweep::CoordinatorFirst,
            seed: 0,
        }
    }
}

impl<S: Scalar> SolverConfig<S> {
    pub fn validate(&self) -> Result<(), AdalError> {
        let bad = |m: &str| Err(AdalError::InvalidConfig(m.to_string()));
        if !(self.rho > S::zero() && self.rho.is_finite()) {
            return bad("rho must be positive");
        }
        if !(self.epsilon > S::zero()) {
            return bad("epsilon must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if let Some(t) = self.tau {
            if !(t > S::zero() && t <= S::one()) {
                return bad("tau must lie in (0, 1]");
            }
        }
        if !(self.sub_tol > S::zero()) || self.sub_max_iters == 0 {
            return bad("subproblem tolerance and cap must be positive");
        }
        Ok(())
    }

    pub fn effective_tau(&self, model: &BuildingModel<S>) -> S {
        self.tau
            .unwrap_or_else(|| S::one() / S::of((1 + model.max_degree()) as f64))
    }

    pub fn subproblem_options(&self) -> SubproblemOptions<S> {
        SubproblemOptions {
            tol: self.sub_tol,
            max_iters: self.sub_max_iters,
            refine_every: 20,
        }
    }
}

/// Everything the solver carries between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateState<S = f64> {
    pub agents: Vec<AgentTrajectory<S>>,
    pub coordinator: CoordinatorTrajectory<S>,
    pub s1: Vec<S>,
    pub s2: Vec<S>,
    pub multipliers: Multipliers<S>,
    pub iteration: usize,
    pub residual_history: Vec<S>,
}

impl<S: Scalar> IterateState<S> {
    /// Multipliers zero, temperatures mid-band (stage 0 at the initial
    /// state), flows at their minimum, cooling at the lower envelope, total
    /// flow equal to the zone sum and slacks closing the equalities.
    pub fn initial(problem: &RelaxedProblem<S>) -> Self {
        let h = problem.horizon();
        let agents: Vec<AgentTrajectory<S>> = problem
            .local_sets
            .iter()
            .zip(problem.model.zones())
            .map(|(set, z)| {
                let mid = S::of(0.5) * (z.t_min + z.t_max);
                AgentTrajectory::from_stacked(&set.lower_point(|_| mid))
            })
            .collect();
        let y: Vec<S> = (0..h)
            .map(|t| agents.iter().fold(S::zero(), |acc, a| acc + a.flows[t]))
            .collect();
        let cap = problem.system.c();
        let s2 = (0..h).map(|t| (cap[t] - y[t]).max(S::zero())).collect();
        IterateState {
            agents,
            coordinator: CoordinatorTrajectory { y_total: y },
            s1: vec![S::zero(); h],
            s2,
            multipliers: Multipliers::zeros(problem.n_zones(), h),
            iteration: 0,
            residual_history: Vec::new(),
        }
    }

    fn check_shape(&self, problem: &RelaxedProblem<S>) -> Result<(), AdalError> {
        let h = problem.horizon();
        let ok = self.agents.len() == problem.n_zones()
            && self
                .agents
                .iter()
                .all(|a| a.temps.len() == h && a.flows.len() == h && a.x_cool.len() == h)
            && self.coordinator.y_total.len() == h
            && self.s1.len() == h
            && self.s2.len() == h
            && self.multipliers.gamma.len() == h
            && self.multipliers.eta.len() == h
            && self.multipliers.lambda.len() == problem.n_zones()
            && self.multipliers.lambda.iter().all(|l| l.len() == h.saturating_sub(1));
        if ok {
            Ok(())
        } else {
            Err(AdalError::WarmStart(format!(
                "expected {} zones over {h} stages",
                problem.n_zones()
            )))
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub objective: f64,
    pub dynamics_residual: f64,
    pub flow_residual: f64,
    pub cap_residual: f64,
    pub wall_clock_s: f64,
}

/// Result of a solve: the best iterate with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution<S = f64> {
    pub agents: Vec<AgentTrajectory<S>>,
    pub y_total: Vec<S>,
    pub s1: Vec<S>,
    pub s2: Vec<S>,
    pub multipliers: Multipliers<S>,
    /// Relaxed objective at the returned point.
    pub objective: S,
    pub residual: S,
    /// Iterations performed.
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<S>,
    pub trace: Vec<TraceRow>,
    /// Zone subproblems that stopped at their iteration cap.
    pub inexact_subproblems: usize,
}

impl<S: Scalar> RelaxedSolution<S> {
    pub fn horizon(&self) -> usize {
        self.y_total.len()
    }
}

/// Knobs that do not change the mathematics of a solve.
#[derive(Debug, Clone, Default)]
pub struct RunOptions<S: Scalar> {
    pub warm_start: Option<IterateState<S>>,
    /// Order in which zone subproblems are dispatched to the worker pool.
    pub agent_order: Option<Vec<usize>>,
}

/// Zone subproblem against `snapshot`, warm-started at the snapshot's own
/// trajectory.
pub fn solve_subproblem_zone<S: Scalar>(
    zone: usize,
    snapshot: &IterateState<S>,
    problem: &RelaxedProblem<S>,
    config: &SolverConfig<S>,
) -> Result<AgentTrajectory<S>, SubproblemError<S>> {
    let op = ZoneOperator::new(problem, zone);
    let qp = ZoneQp::new(&op, problem, snapshot, config.rho);
    let x0 = snapshot.agents[zone].to_stacked();
    let sol = minimize_zone(&qp, &problem.local_sets[zone], &x0, config.subproblem_options());
    let traj = AgentTrajectory::from_stacked(&sol.x);
    if sol.converged {
        Ok(traj)
    } else {
        Err(SubproblemError {
            zone,
            iterations: sol.iterations,
            gradient_mapping: sol.gradient_mapping,
            best: traj,
        })
    }
}

/// Build the relaxed problem with default options and solve it from the
/// default starting point.
pub fn adal_solve<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    config: &SolverConfig<S>,
) -> Result<(IterateState<S>, RelaxedSolution<S>), AdalError> {
    let problem = RelaxedProblem::new(model, exo, RelaxOptions::default())?;
    adal_solve_problem(&problem, config, RunOptions::default())
}

fn blend<S: Scalar>(old: &mut [S], new: &[S], tau: S) {
    for (o, &n) in old.iter_mut().zip(new) {
        *o += tau * (n - *o);
    }
}

fn solve_zones<S: Scalar>(
    solvers: &ZoneSolvers<S>,
    order: &[usize],
    view: &IterateState<S>,
    problem: &RelaxedProblem<S>,
    rho: S,
    opts: SubproblemOptions<S>,
) -> Vec<(usize, (AgentTrajectory<S>, ZoneSolve<S>))> {
    order
        .par_iter()
        .map(|&i| (i, solvers.solve(i, view, problem, rho, opts)))
        .collect()
}

pub fn adal_solve_problem<S: Scalar>(
    problem: &RelaxedProblem<S>,
    config: &SolverConfig<S>,
    options: RunOptions<S>,
) -> Result<(IterateState<S>, RelaxedSolution<S>), AdalError> {
    config.validate()?;
    let n = problem.n_zones();
    let order: Vec<usize> = match options.agent_order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return Err(AdalError::InvalidConfig("agent order must permute the zones".into()));
            }
            o
        }
        None => (0..n).collect(),
    };
    let mut state = match options.warm_start {
        Some(s) => {
            s.check_shape(problem)?;
            s
        }
        None => IterateState::initial(problem),
    };
    let tau = config.effective_tau(&problem.model);
    let dual = match config.dual_step {
        DualStep::Rho => config.rho,
        DualStep::RhoTau => config.rho * tau,
    };
    let solvers = ZoneSolvers::new(problem);
    let sub_opts = config.subproblem_options();
    let start = Instant::now();
    let mut trace = Vec::new();
    let mut inexact = 0usize;
    let mut best: Option<(S, IterateState<S>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        let (coord, zones, coord_step) = match config.sweep {
            Sweep::CoordinatorFirst => {
                let coord = solve_subproblem_coordinator(&state, problem, config.rho);
                let mut view = state.clone();
                view.coordinator = coord.coordinator.clone();
                view.s1.clone_from(&coord.s1);
                view.s2.clone_from(&coord.s2);
                let zones = solve_zones(&solvers, &order, &view, problem, config.rho, sub_opts);
                (coord, zones, S::one())
            }
            Sweep::Jacobi => {
                let snapshot = &state;
                let (coord, zones) = rayon::join(
                    || solve_subproblem_coordinator(snapshot, problem, config.rho),
                    || solve_zones(&solvers, &order, snapshot, problem, config.rho, sub_opts),
                );
                (coord, zones, tau)
            }
        };
        let mut next = state.clone();
        for (i, (traj, sol)) in zones {
            if !sol.converged {
                inexact += 1;
            }
            let a = &mut next.agents[i];
            blend(&mut a.temps, &traj.temps, tau);
            blend(&mut a.flows, &traj.flows, tau);
            blend(&mut a.x_cool, &traj.x_cool, tau);
        }
        blend(&mut next.coordinator.y_total, &coord.coordinator.y_total, coord_step);
        blend(&mut next.s1, &coord.s1, coord_step);
        blend(&mut next.s2, &coord.s2, coord_step);
        next.iteration += 1;
        iterations += 1;

        let res = residual_vectors(&next, problem);
        let parts = res.parts();
        let r = parts.total();
        next.residual_history.push(r);
        let objective = problem.objective(&next.agents, &next.coordinator.y_total);
        trace.push(TraceRow {
            iteration: next.iteration,
            residual: r.as_f64(),
            objective: objective.as_f64(),
            dynamics_residual: parts.dynamics.as_f64(),
            flow_residual: parts.flow.as_f64(),
            cap_residual: parts.cap.as_f64(),
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, next.clone()));
        }
        if r <= config.epsilon {
            state = next;
            converged = true;
            break;
        }
        next.multipliers = update_multipliers_with(&next.multipliers, &res, dual);
        state = next;
    }

    let chosen = if converged {
        state.clone()
    } else {
        best.map(|(_, s)| s).unwrap_or_else(|| state.clone())
    };
    let residual_value = chosen
        .residual_history
        .last()
        .copied()
        .unwrap_or_else(|| residual(&chosen, problem));
    let solution = RelaxedSolution {
        objective: problem.objective(&chosen.agents, &chosen.coordinator.y_total),
        residual: residual_value,
        agents: chosen.agents,
        y_total: chosen.coordinator.y_total,
        s1: chosen.s1,
        s2: chosen.s2,
        multipliers: chosen.multipliers,
        iterations,
        converged,
        residual_history: state.residual_history.clone(),
        trace,
        inexact_subproblems: inexact,
    };
    Ok((state, solution))
}
