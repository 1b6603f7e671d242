//! Centralized reference solvers and a brute-force oracle for tiny
//! instances.
//!
//! [`solve_centralized_relaxed`] solves the convex relaxation in one
//! process and gives the lower bound. [`solve_centralized_nonlinear`] is a
//! multi-start local method on the bilinear problem. [`brute_force_oracle`]
//! enumerates flow grids and is exact up to grid resolution.

mod brute;
mod nonlinear;
mod relaxed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::recover::{RecoverError, Schedule};
use crate::relax::{AgentTrajectory, RelaxError};
use crate::scalar::Scalar;

pub use brute::{brute_force_oracle, flow_grid, BruteForceLimits};
pub use nonlinear::{flow_gradient, solve_centralized_nonlinear, NonlinearOptions};
pub use relaxed::{solve_centralized_relaxed, solve_relaxed_problem, CentralOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("instance too large for this method: {0}")]
    TooLarge(String),
    #[error("no feasible schedule on a flow grid of resolution {resolution}")]
    InfeasibleAtResolution { resolution: f64 },
    #[error("instance infeasible: {family} violated by {violation}")]
    Infeasible { family: String, violation: f64 },
    #[error("every start failed ({0})")]
    AllStartsFailed(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Recover(#[from] RecoverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CentralizedRelaxed,
    CentralizedNonlinear,
    BruteForce,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::CentralizedRelaxed => "centralized-relaxed",
            Method::CentralizedNonlinear => "centralized-nonlinear",
            Method::BruteForce => "brute-force",
        }
    }
}

/// Point of the relaxed problem: zone trajectories and the total flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPoint<S = f64> {
    pub agents: Vec<AgentTrajectory<S>>,
    pub y_total: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Largest constraint violation at the returned point.
    pub max_violation: f64,
    /// Projected-gradient norm at the returned point.
    pub stationarity: f64,
    pub starts_tried: usize,
    pub starts_feasible: usize,
    /// Rollouts completed by the oracle.
    pub evaluated: u64,
    pub wall_clock_s: f64,
    /// True when only local optimality is claimed.
    pub local_only: bool,
}

/// Output of a reference method.
///
/// The relaxed method returns a point of the relaxation rather than a
/// schedule; the other methods return a schedule that satisfies every
/// constraint of the bilinear problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution<S = f64> {
    pub method: Method,
    pub objective: S,
    pub schedule: Option<Schedule<S>>,
    pub relaxed: Option<RelaxedPoint<S>>,
    pub diagnostics: Diagnostics,
}

/// Lexicographic comparison used to break cost ties deterministically.
pub(crate) fn lex_less<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> bool {
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            if x < y {
                return true;
            }
            if x > y {
                return false;
            }
        }
    }
    false
}

/// First-order change in cost when every flow moves by one grid cell:
/// `resolution * Σ |∂cost/∂m|` at `flows`.
pub fn grid_cell_increment<S: Scalar>(
    model: &crate::model::BuildingModel<S>,
    exo: &crate::model::ExogenousSeries<S>,
    flows: &[Vec<S>],
    resolution: S,
) -> Result<S, BaselineError> {
    let g = flow_gradient(model, exo, flows)?;
    Ok(resolution * g.iter().flatten().fold(S::zero(), |acc, v| acc + v.abs()))
}
