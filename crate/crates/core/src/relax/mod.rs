//! Convex relaxation of the scheduling problem.
//!
//! Each bilinear product `m (T - T^c)` is replaced by a variable `X` bounded by
//! its McCormick envelopes, the total AHU flow becomes a coordinator variable
//! `Y`, and the coupled dynamics are written in stacked per-agent form.

pub mod feasible;
pub mod mccormick;
pub mod simplex;
pub mod stacked;

use thiserror::Error;

use crate::model::{build_discrete_dynamics, BuildingModel, DiscreteDynamics, ExogenousSeries, ModelError};
use crate::power::CostWeights;
use crate::scalar::Scalar;

pub use feasible::{local_feasible_set, LocalFeasibleSet, LocalSetOptions, StageConstraints, STAGE_VARS};
pub use mccormick::{mccormick_constraints, AffineRow, McCormickBox};
pub use simplex::{Feature, StageRegion};
pub use stacked::{
    assemble_stacked, AgentTrajectory, AssemblyOptions, CoordinatorTrajectory, DenseMatrix, StackedSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("degenerate envelope box: {0}")]
    DegenerateBox(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions<S> {
    /// Pin every zone's stage-0 temperature to its initial state.
    pub pin_initial: bool,
    /// Optional comfort band replacing the last stage's band.
    pub terminal_band: Option<(S, S)>,
    pub dense_threshold: usize,
}

impl<S> Default for RelaxOptions<S> {
    fn default() -> Self {
        RelaxOptions {
            pin_initial: true,
            terminal_band: None,
            dense_threshold: 0,
        }
    }
}

/// Fully assembled relaxed instance shared read-only by all agents.
#[derive(Debug, Clone)]
pub struct RelaxedProblem<S: Scalar = f64> {
    pub model: BuildingModel<S>,
    pub exo: ExogenousSeries<S>,
    pub dynamics: DiscreteDynamics<S>,
    pub system: StackedSystem<S>,
    pub local_sets: Vec<LocalFeasibleSet<S>>,
    /// Per-stage cost of one unit of `X` (any zone).
    pub x_weight: Vec<S>,
    /// Per-stage linear cost of `Y` (fresh-air share).
    pub y_linear: Vec<S>,
    /// Per-stage coefficient of `Y^3` (fan).
    pub y_cubic: Vec<S>,
}

impl<S: Scalar> RelaxedProblem<S> {
    pub fn new(
        model: &BuildingModel<S>,
        exo: &ExogenousSeries<S>,
        options: RelaxOptions<S>,
    ) -> Result<Self, RelaxError> {
        let dynamics = build_discrete_dynamics(model, exo)?;
        let system = assemble_stacked(
            &dynamics,
            model,
            AssemblyOptions {
                dense_threshold: options.dense_threshold,
            },
        )?;
        let local_sets = model
            .zones()
            .iter()
            .map(|z| {
                local_feasible_set(
                    z,
                    &exo.t_supply,
                    LocalSetOptions {
                        pinned_initial: options.pin_initial.then_some(z.t_init),
                        terminal_band: options.terminal_band,
                    },
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let CostWeights {
            x_weight,
            y_linear,
            y_cubic,
        } = CostWeights::new(model, exo);
        Ok(RelaxedProblem {
            model: model.clone(),
            exo: exo.clone(),
            dynamics,
            system,
            local_sets,
            x_weight,
            y_linear,
            y_cubic,
        })
    }

    pub fn n_zones(&self) -> usize {
        self.model.n_zones()
    }

    pub fn horizon(&self) -> usize {
        self.model.horizon()
    }

    /// Cost owned by zone `i`: price-weighted recirculated cooling.
    pub fn zone_cost(&self, agent: &AgentTrajectory<S>) -> S {
        agent
            .x_cool
            .iter()
            .zip(&self.x_weight)
            .fold(S::zero(), |acc, (&x, &w)| acc + w * x)
    }

    /// Cost owned by the coordinator: fresh-air cooling and fan power.
    pub fn coordinator_cost(&self, y: &[S]) -> S {
        y.iter()
            .enumerate()
            .fold(S::zero(), |acc, (t, &v)| acc + self.y_linear[t] * v + self.y_cubic[t] * v * v * v)
    }

    /// Relaxed objective at `(x, Y)`.
    pub fn objective(&self, agents: &[AgentTrajectory<S>], y: &[S]) -> S {
        agents.iter().fold(self.coordinator_cost(y), |acc, a| acc + self.zone_cost(a))
    }

    /// Slacks that turn the inequality form into the equality form.
    pub fn slacks(&self, agents: &[AgentTrajectory<S>], y: &[S]) -> (Vec<S>, Vec<S>) {
        let h = self.horizon();
        let cap = self.system.c();
        let mut s1 = Vec::with_capacity(h);
        let mut s2 = Vec::with_capacity(h);
        for t in 0..h {
            let m = stacked::total_flow(agents, t);
            s1.push(y[t] - m);
            s2.push(cap[t] - m);
        }
        (s1, s2)
    }

    /// Largest violation of any relaxed constraint (local sets, dynamics,
    /// flow coupling, AHU cap, `Y >= 0`). Zero on feasible points.
    pub fn max_violation(&self, agents: &[AgentTrajectory<S>], y: &[S]) -> S {
        let mut worst = S::zero();
        for (i, a) in agents.iter().enumerate() {
            for (t, st) in self.local_sets[i].stages.iter().enumerate() {
                let p = [a.temps[t], a.flows[t], a.x_cool[t]];
                worst = worst
                    .max(st.t_bounds.0 - p[0])
                    .max(p[0] - st.t_bounds.1)
                    .max(st.m_bounds.0 - p[1])
                    .max(p[1] - st.m_bounds.1);
                for r in &st.rows {
                    worst = worst.max(-r.slack(p));
                }
            }
            for r in self.system.dyn_residual(i, agents) {
                worst = worst.max(r.abs());
            }
        }
        let (s1, s2) = self.slacks(agents, y);
        for t in 0..self.horizon() {
            worst = worst.max(-s1[t]).max(-s2[t]).max(-y[t]);
        }
        worst
    }

    pub fn is_feasible(&self, agents: &[AgentTrajectory<S>], y: &[S], tol: S) -> bool {
        self.max_violation(agents, y) <= tol
    }
}
