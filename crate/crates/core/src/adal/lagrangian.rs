//! Augmented Lagrangian, coupled-constraint residual and dual ascent.

use serde::{Deserialize, Serialize};

use super::{IterateState, Multipliers};
use crate::relax::RelaxedProblem;
use crate::scalar::{dot, norm2, Scalar};

/// Residual vectors of the three coupled constraint families.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals<S> {
    /// `[zone][row]` dynamics residuals.
    pub dynamics: Vec<Vec<S>>,
    /// `Σm - Y + s1` per stage.
    pub flow: Vec<S>,
    /// `Σm - cap + s2` per stage.
    pub cap: Vec<S>,
}

/// 2-norm of each constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualParts<S = f64> {
    pub dynamics: S,
    pub flow: S,
    pub cap: S,
}

impl<S: Scalar> ResidualParts<S> {
    pub fn total(&self) -> S {
        self.dynamics + self.flow + self.cap
    }
}

pub fn residual_vectors<S: Scalar>(state: &IterateState<S>, problem: &RelaxedProblem<S>) -> Residuals<S> {
    let sys = &problem.system;
    Residuals {
        dynamics: (0..problem.n_zones())
            .map(|i| sys.dyn_residual(i, &state.agents))
            .collect(),
        flow: sys.flow_residual(&state.agents, &state.coordinator.y_total, &state.s1),
        cap: sys.cap_residual(&state.agents, &state.s2),
    }
}

impl<S: Scalar> Residuals<S> {
    /// Per-family norms, with the dynamics norms summed zone by zone in index order.
    pub fn parts(&self) -> ResidualParts<S> {
        ResidualParts {
            dynamics: self.dynamics.iter().fold(S::zero(), |acc, r| acc + norm2(r)),
            flow: norm2(&self.flow),
            cap: norm2(&self.cap),
        }
    }
}

/// Sum of the 2-norms of every zone's dynamics residual and of the two flow
/// families.
pub fn residual<S: Scalar>(state: &IterateState<S>, problem: &RelaxedProblem<S>) -> S {
    residual_vectors(state, problem).parts().total()
}

pub fn augmented_lagrangian<S: Scalar>(state: &IterateState<S>, problem: &RelaxedProblem<S>, rho: S) -> S {
    let r = residual_vectors(state, problem);
    let half = S::of(0.5) * rho;
    let mu = &state.multipliers;
    let mut value = problem.objective(&state.agents, &state.coordinator.y_total);
    for (lam, res) in mu.lambda.iter().zip(&r.dynamics) {
        value += dot(lam, res) + half * dot(res, res);
    }
    value += dot(&mu.gamma, &r.flow) + half * dot(&r.flow, &r.flow);
    value += dot(&mu.eta, &r.cap) + half * dot(&r.cap, &r.cap);
    value
}

/// Dual ascent with step `step` on every coupled row.
pub fn update_multipliers_with<S: Scalar>(mu: &Multipliers<S>, r: &Residuals<S>, step: S) -> Multipliers<S> {
    let add = |m: &[S], d: &[S]| m.iter().zip(d).map(|(&a, &b)| a + step * b).collect::<Vec<S>>();
    Multipliers {
        lambda: mu.lambda.iter().zip(&r.dynamics).map(|(m, d)| add(m, d)).collect(),
        gamma: add(&mu.gamma, &r.flow),
        eta: add(&mu.eta, &r.cap),
    }
}

/// `λ += ρ r_dyn`, `γ += ρ r_flow`, `η += ρ r_cap` at the state's primal point.
pub fn update_multipliers<S: Scalar>(state: &IterateState<S>, problem: &RelaxedProblem<S>, rho: S) -> Multipliers<S> {
    update_multipliers_with(&state.multipliers, &residual_vectors(state, problem), rho)
}
