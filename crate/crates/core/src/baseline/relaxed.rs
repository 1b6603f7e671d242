//! Centralized solve of the relaxed problem by an augmented Lagrangian
//! method: dynamics as equalities, flow coupling and the AHU cap as
//! inequalities, inner minimization by accelerated projected gradient over
//! the per-stage envelope regions and `Y >= 0`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BaselineError, Diagnostics, Method, ReferenceSolution, RelaxedPoint};
use crate::model::{BuildingModel, ExogenousSeries};
use crate::relax::{AgentTrajectory, RelaxOptions, RelaxedProblem, STAGE_VARS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralOptions<S = f64> {
    /// Target for both constraint violation and inner stationarity.
    pub tol: S,
    pub max_outer: usize,
    pub max_inner: usize,
    pub rho0: S,
}

impl<S: Scalar> Default for CentralOptions<S> {
    fn default() -> Self {
        CentralOptions {
            tol: S::of(1e-6),
            max_outer: 80,
            max_inner: 200_000,
            rho0: S::of(10.0),
        }
    }
}

struct Multipliers<S> {
    /// `[zone * (T-1) + t]`
    lambda: Vec<S>,
    flow: Vec<S>,
    cap: Vec<S>,
}

/// Constraint values at a point.
struct Residuals<S> {
    dynamics: Vec<S>,
    /// `Σm - Y`, feasible when `<= 0`.
    flow: Vec<S>,
    /// `Σm - cap`, feasible when `<= 0`.
    cap: Vec<S>,
}

struct Central<'a, S: Scalar> {
    p: &'a RelaxedProblem<S>,
    n: usize,
    h: usize,
}

impl<'a, S: Scalar> Central<'a, S> {
    fn len(&self) -> usize {
        self.n * STAGE_VARS * self.h + self.h
    }

    #[inline]
    fn at(&self, i: usize, t: usize) -> usize {
        (i * self.h + t) * STAGE_VARS
    }

    #[inline]
    fn y(&self, t: usize) -> usize {
        self.n * STAGE_VARS * self.h + t
    }

    fn flow_sum(&self, z: &[S], t: usize) -> S {
        (0..self.n).fold(S::zero(), |acc, i| acc + z[self.at(i, t) + 1])
    }

    fn residuals(&self, z: &[S]) -> Residuals<S> {
        let d = &self.p.dynamics;
        let cap = self.p.model.ahu().m_total_max;
        let mut dynamics = Vec::with_capacity(self.n * self.h.saturating_sub(1));
        for i in 0..self.n {
            for t in 0..self.h.saturating_sub(1) {
                let k = self.at(i, t);
                let coupled = d.a_neighbor[i]
                    .iter()
                    .fold(S::zero(), |acc, &(j, a)| acc + a * z[self.at(j, t)]);
                dynamics.push(
                    d.a_self[i] * z[k] + coupled + d.c_self[i] * z[k + 2] + d.d_const[i][t] - z[self.at(i, t + 1)],
                );
            }
        }
        let mut flow = Vec::with_capacity(self.h);
        let mut caps = Vec::with_capacity(self.h);
        for t in 0..self.h {
            let m = self.flow_sum(z, t);
            flow.push(m - z[self.y(t)]);
            caps.push(m - cap);
        }
        Residuals {
            dynamics,
            flow,
            cap: caps,
        }
    }

    fn objective(&self, z: &[S]) -> S {
        let p = self.p;
        let mut f = S::zero();
        for t in 0..self.h {
            let y = z[self.y(t)];
            f += p.y_linear[t] * y + p.y_cubic[t] * y * y * y;
            for i in 0..self.n {
                f += p.x_weight[t] * z[self.at(i, t) + 2];
            }
        }
        f
    }

    /// Augmented Lagrangian value; gradient written into `g`.
    fn eval(&self, z: &[S], mult: &Multipliers<S>, rho: S, g: &mut [S]) -> S {
        let p = self.p;
        let d = &p.dynamics;
        g.iter_mut().for_each(|v| *v = S::zero());
        let mut f = S::zero();
        let half = S::of(0.5);
        let three = S::of(3.0);
        for t in 0..self.h {
            let ky = self.y(t);
            let y = z[ky];
            f += p.y_linear[t] * y + p.y_cubic[t] * y * y * y;
            g[ky] += p.y_linear[t] + three * p.y_cubic[t] * y * y;
            for i in 0..self.n {
                let k = self.at(i, t) + 2;
                f += p.x_weight[t] * z[k];
                g[k] += p.x_weight[t];
            }
        }
        let rows = self.h.saturating_sub(1);
        for i in 0..self.n {
            for t in 0..rows {
                let k = self.at(i, t);
                let coupled = d.a_neighbor[i]
                    .iter()
                    .fold(S::zero(), |acc, &(j, a)| acc + a * z[self.at(j, t)]);
                let r = d.a_self[i] * z[k] + coupled + d.c_self[i] * z[k + 2] + d.d_const[i][t] - z[self.at(i, t + 1)];
                let lam = mult.lambda[i * rows + t];
                f += lam * r + half * rho * r * r;
                let w = lam + rho * r;
                g[k] += d.a_self[i] * w;
                g[k + 2] += d.c_self[i] * w;
                g[self.at(i, t + 1)] -= w;
                for &(j, a) in &d.a_neighbor[i] {
                    g[self.at(j, t)] += a * w;
                }
            }
        }
        let cap = p.model.ahu().m_total_max;
        for t in 0..self.h {
            let m = self.flow_sum(z, t);
            let ky = self.y(t);
            let v1 = (mult.flow[t] + rho * (m - z[ky])).max(S::zero());
            let v2 = (mult.cap[t] + rho * (m - cap)).max(S::zero());
            f += (v1 * v1 - mult.flow[t] * mult.flow[t] + v2 * v2 - mult.cap[t] * mult.cap[t]) / (S::of(2.0) * rho);
            g[ky] -= v1;
            for i in 0..self.n {
                g[self.at(i, t) + 1] += v1 + v2;
            }
        }
        f
    }

    fn project(&self, z: &mut [S]) {
        let w = STAGE_VARS * self.h;
        for (i, set) in self.p.local_sets.iter().enumerate() {
            set.project(&mut z[i * w..(i + 1) * w]);
        }
        for t in 0..self.h {
            let k = self.y(t);
            z[k] = z[k].max(S::zero());
        }
    }

    /// Accelerated projected gradient with backtracking and gradient
    /// restart. Returns iterations used and the final gradient mapping.
    fn inner(&self, z: &mut Vec<S>, mult: &Multipliers<S>, rho: S, tol: S, max_iter: usize, lip: &mut S) -> (usize, S) {
        let n = self.len();
        let mut x = z.clone();
        let mut y = x.clone();
        let mut gy = vec![S::zero(); n];
        let mut fy = self.eval(&y, mult, rho, &mut gy);
        let mut xn = vec![S::zero(); n];
        let mut gn = vec![S::zero(); n];
        let mut tk = S::one();
        let mut gm = S::infinity();
        let mut iters = 0;
        let half = S::of(0.5);
        while iters < max_iter {
            iters += 1;
            let fxn = loop {
                for k in 0..n {
                    xn[k] = y[k] - gy[k] / *lip;
                }
                self.project(&mut xn);
                let fxn = self.eval(&xn, mult, rho, &mut gn);
                let mut lin = S::zero();
                let mut sq = S::zero();
                for k in 0..n {
                    let dk = xn[k] - y[k];
                    lin += gy[k] * dk;
                    sq += dk * dk;
                }
                let slack = S::of(1e-12) * (S::one() + fy.abs());
                if fxn <= fy + lin + half * *lip * sq + slack {
                    break fxn;
                }
                *lip = *lip * S::of(2.0);
            };
            gm = (0..n).fold(S::zero(), |acc, k| acc.max((y[k] - xn[k]).abs())) * *lip;
            if gm <= tol {
                std::mem::swap(&mut x, &mut xn);
                break;
            }
            let restart = (0..n).fold(S::zero(), |acc, k| acc + (y[k] - xn[k]) * (xn[k] - x[k])) > S::zero();
            let tn = half * (S::one() + (S::one() + S::of(4.0) * tk * tk).sqrt());
            if restart {
                tk = S::one();
                y.clone_from(&xn);
                gy.clone_from(&gn);
                fy = fxn;
            } else {
                let beta = (tk - S::one()) / tn;
                for k in 0..n {
                    y[k] = xn[k] + beta * (xn[k] - x[k]);
                }
                fy = self.eval(&y, mult, rho, &mut gy);
                tk = tn;
            }
            std::mem::swap(&mut x, &mut xn);
            *lip = *lip * S::of(0.95);
        }
        *z = x;
        (iters, gm)
    }

    fn initial_point(&self) -> Vec<S> {
        let mut z = vec![S::zero(); self.len()];
        for (i, zone) in self.p.model.zones().iter().enumerate() {
            let mid = S::of(0.5) * (zone.t_min + zone.t_max);
            let lower = self.p.local_sets[i].lower_point(|_| mid);
            let w = STAGE_VARS * self.h;
            z[i * w..(i + 1) * w].copy_from_slice(&lower);
        }
        for t in 0..self.h {
            let k = self.y(t);
            z[k] = self.flow_sum(&z, t);
        }
        z
    }

    fn lipschitz_guess(&self, rho: S) -> S {
        let d = &self.p.dynamics;
        let mut dyn_row = S::zero();
        for i in 0..self.n {
            let r = S::one()
                + d.a_self[i] * d.a_self[i]
                + d.c_self[i] * d.c_self[i]
                + d.a_neighbor[i].iter().fold(S::zero(), |acc, &(_, a)| acc + a * a);
            dyn_row = dyn_row.max(r);
        }
        rho * (S::of(2.0) * dyn_row + S::of(2.0 * (self.n + 1) as f64))
    }
}

fn violation<S: Scalar>(r: &Residuals<S>) -> (S, &'static str) {
    let mut worst = (S::zero(), "dynamics");
    for &v in &r.dynamics {
        if v.abs() > worst.0 {
            worst = (v.abs(), "dynamics");
        }
    }
    for &v in &r.flow {
        if v > worst.0 {
            worst = (v, "flow coupling");
        }
    }
    for &v in &r.cap {
        if v > worst.0 {
            worst = (v, "ahu cap");
        }
    }
    worst
}

pub fn solve_centralized_relaxed<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    options: &CentralOptions<S>,
) -> Result<ReferenceSolution<S>, BaselineError> {
    let problem = RelaxedProblem::new(model, exo, RelaxOptions::default())?;
    solve_relaxed_problem(&problem, options)
}

/// Solve an already assembled relaxed problem to the requested tolerance.
pub fn solve_relaxed_problem<S: Scalar>(
    problem: &RelaxedProblem<S>,
    options: &CentralOptions<S>,
) -> Result<ReferenceSolution<S>, BaselineError> {
    if !(options.tol > S::zero()) || !(options.rho0 > S::zero()) || options.max_outer == 0 {
        return Err(BaselineError::InvalidOptions("tol, rho0 and max_outer must be positive".into()));
    }
    let start = Instant::now();
    let floor: S = problem.model.zones().iter().map(|z| z.m_min).sum();
    let cap = problem.model.ahu().m_total_max;
    if floor > cap {
        return Err(BaselineError::Infeasible {
            family: "ahu cap".into(),
            violation: (floor - cap).as_f64(),
        });
    }
    let c = Central {
        p: problem,
        n: problem.n_zones(),
        h: problem.horizon(),
    };
    let mut z = c.initial_point();
    let mut mult = Multipliers {
        lambda: vec![S::zero(); c.n * c.h.saturating_sub(1)],
        flow: vec![S::zero(); c.h],
        cap: vec![S::zero(); c.h],
    };
    let mut rho = options.rho0;
    let mut lip = c.lipschitz_guess(rho);
    let mut inner_total = 0;
    let mut prev_viol = S::infinity();
    let mut outer = 0;
    let mut stationarity = S::infinity();
    let mut viol = S::infinity();
    let mut family = "dynamics";
    let mut inner_tol = S::of(1e-2).max(options.tol);
    while outer < options.max_outer {
        outer += 1;
        let (it, gm) = c.inner(&mut z, &mult, rho, inner_tol, options.max_inner, &mut lip);
        inner_total += it;
        stationarity = gm;
        let r = c.residuals(&z);
        (viol, family) = violation(&r);
        for (l, &v) in mult.lambda.iter_mut().zip(&r.dynamics) {
            *l += rho * v;
        }
        for t in 0..c.h {
            mult.flow[t] = (mult.flow[t] + rho * r.flow[t]).max(S::zero());
            mult.cap[t] = (mult.cap[t] + rho * r.cap[t]).max(S::zero());
        }
        if viol <= options.tol && gm <= options.tol {
            break;
        }
        // Past feasibility a larger penalty only worsens conditioning.
        if viol > options.tol && viol > S::of(0.25) * prev_viol && rho < S::of(1e6) {
            rho = rho * S::of(4.0);
            lip = lip * S::of(4.0);
        }
        prev_viol = viol;
        inner_tol = (inner_tol * S::of(0.2)).max(options.tol);
    }
    if viol > options.tol.sqrt() {
        return Err(BaselineError::Infeasible {
            family: family.into(),
            violation: viol.as_f64(),
        });
    }
    let w = STAGE_VARS * c.h;
    let agents = (0..c.n)
        .map(|i| AgentTrajectory::from_stacked(&z[i * w..(i + 1) * w]))
        .collect();
    let y_total = (0..c.h).map(|t| z[c.y(t)]).collect();
    Ok(ReferenceSolution {
        method: Method::CentralizedRelaxed,
        objective: c.objective(&z),
        schedule: None,
        relaxed: Some(RelaxedPoint { agents, y_total }),
        diagnostics: Diagnostics {
            outer_iterations: outer,
            inner_iterations: inner_total,
            max_violation: viol.as_f64(),
            stationarity: stationarity.as_f64(),
            starts_tried: 1,
            starts_feasible: 1,
            evaluated: 0,
            wall_clock_s: start.elapsed().as_secs_f64(),
            local_only: false,
        },
    })
}
