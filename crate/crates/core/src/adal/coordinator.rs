//! Subproblem of the virtual AHU agent: total flow `Y` and both slacks.
//!
//! The objective separates over stages. For stage `t` with frozen zone flow
//! sum `M`, cap `c` and multipliers `γ`, `η` it reads
//! `a Y + b Y^3 + γ(M - Y + s1) + ρ/2 (M - Y + s1)^2 + η(M - c + s2) + ρ/2 (M - c + s2)^2`
//! over `Y, s1, s2 >= 0`.

use super::IterateState;
use crate::relax::{CoordinatorTrajectory, RelaxedProblem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorSolution<S> {
    pub coordinator: CoordinatorTrajectory<S>,
    pub s1: Vec<S>,
    pub s2: Vec<S>,
}

/// Minimizer of one stage, returned as `(Y, s1, s2)`.
pub fn solve_coordinator_stage<S: Scalar>(
    linear: S,
    cubic: S,
    flow_sum: S,
    cap: S,
    gamma: S,
    eta: S,
    rho: S,
) -> (S, S, S) {
    let zero = S::zero();
    let s2 = (cap - flow_sum - eta / rho).max(zero);
    // After minimizing out s1 the derivative in Y is continuous and
    // nondecreasing; below the kink the penalty row is active.
    let kink = flow_sum + gamma / rho;
    let three = S::of(3.0);
    let deriv = |y: S| {
        let base = linear + three * cubic * y * y;
        if y <= kink {
            base - gamma - rho * (flow_sum - y)
        } else {
            base
        }
    };
    let curvature = |y: S| {
        let base = S::of(6.0) * cubic * y;
        if y <= kink {
            base + rho
        } else {
            base
        }
    };
    let y = if deriv(zero) >= zero {
        zero
    } else {
        let mut lo = zero;
        let mut hi = kink.max(S::one());
        let mut grow = 0;
        while deriv(hi) < zero && grow < 200 {
            lo = hi;
            hi = hi + hi;
            grow += 1;
        }
        leftmost_root(deriv, curvature, lo, hi)
    };
    let s1 = (y - flow_sum - gamma / rho).max(zero);
    (y, s1, s2)
}

/// Smallest `y` in `(lo, hi]` with `f(y) >= 0` for nondecreasing `f`,
/// `f(lo) < 0 <= f(hi)`. Newton steps are taken when they stay inside the
/// bracket, bisection otherwise.
fn leftmost_root<S: Scalar>(f: impl Fn(S) -> S, df: impl Fn(S) -> S, mut lo: S, mut hi: S) -> S {
    let half = S::of(0.5);
    let mut y = hi;
    for _ in 0..200 {
        let v = f(y);
        if v >= S::zero() {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo <= S::epsilon() * hi.abs().max(S::one()) {
            break;
        }
        let d = df(y);
        let newton = if d > S::zero() { y - v / d } else { S::nan() };
        y = if newton > lo && newton < hi {
            newton
        } else {
            half * (lo + hi)
        };
    }
    hi
}

pub fn solve_subproblem_coordinator<S: Scalar>(
    snapshot: &IterateState<S>,
    problem: &RelaxedProblem<S>,
    rho: S,
) -> CoordinatorSolution<S> {
    let h = problem.horizon();
    let cap = problem.system.c();
    let mu = &snapshot.multipliers;
    let mut y = Vec::with_capacity(h);
    let mut s1 = Vec::with_capacity(h);
    let mut s2 = Vec::with_capacity(h);
    for t in 0..h {
        let m = snapshot.agents.iter().fold(S::zero(), |acc, a| acc + a.flows[t]);
        let (yt, a, b) = solve_coordinator_stage(
            problem.y_linear[t],
            problem.y_cubic[t],
            m,
            cap[t],
            mu.gamma[t],
            mu.eta[t],
            rho,
        );
        y.push(yt);
        s1.push(a);
        s2.push(b);
    }
    CoordinatorSolution {
        coordinator: CoordinatorTrajectory { y_total: y },
        s1,
        s2,
    }
}
