//! Local solver for the bilinear scheduling problem in the flows alone.
//!
//! Temperatures follow from a rollout, so the dynamics hold exactly. Flow
//! bounds and the AHU cap are handled by projection; the comfort band by an
//! augmented Lagrangian. Inner problems use spectral projected gradient with
//! a nonmonotone line search, gradients come from an adjoint sweep.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::relaxed::{solve_relaxed_problem, CentralOptions};
use super::{lex_less, BaselineError, Diagnostics, Method, ReferenceSolution};
use crate::model::{bilinear_cooling, build_discrete_dynamics, BuildingModel, DiscreteDynamics, ExogenousSeries};
use crate::power::CostWeights;
use crate::recover::{recover_from_cooling, schedule_from_flows, RecoverOptions, Schedule};
use crate::relax::{RelaxOptions, RelaxedProblem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearOptions<S = f64> {
    /// Comfort violation accepted at the end, °C.
    pub tol: S,
    /// Projected-gradient norm that ends an inner solve.
    pub stationarity_tol: S,
    /// Random starts on top of the deterministic ones.
    pub restarts: usize,
    pub seed: u64,
    /// Extra starting flows, `[zone][stage]`.
    pub warm_starts: Vec<Vec<Vec<S>>>,
    /// Start from the recovered centralized relaxed solution as well.
    pub relaxation_start: bool,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl<S: Scalar> Default for NonlinearOptions<S> {
    fn default() -> Self {
        NonlinearOptions {
            tol: S::of(1e-7),
            stationarity_tol: S::of(1e-7),
            restarts: 4,
            seed: 0,
            warm_starts: Vec::new(),
            relaxation_start: true,
            max_outer: 40,
            max_inner: 20_000,
        }
    }
}

struct Rollout<'a, S: Scalar> {
    model: &'a BuildingModel<S>,
    exo: &'a ExogenousSeries<S>,
    dynamics: DiscreteDynamics<S>,
    weights: CostWeights<S>,
    /// For each zone, the zones whose dynamics read it, with the coefficient.
    readers: Vec<Vec<(usize, S)>>,
    n: usize,
    h: usize,
}

/// Comfort multipliers per `[zone * T + t]`; stage 0 entries stay zero.
struct Comfort<S> {
    hi: Vec<S>,
    lo: Vec<S>,
    rho: S,
}

impl<'a, S: Scalar> Rollout<'a, S> {
    fn new(model: &'a BuildingModel<S>, exo: &'a ExogenousSeries<S>) -> Result<Self, BaselineError> {
        let dynamics = build_discrete_dynamics(model, exo)?;
        let n = model.n_zones();
        let mut readers = vec![Vec::new(); n];
        for (i, row) in dynamics.a_neighbor.iter().enumerate() {
            for &(j, a) in row {
                readers[j].push((i, a));
            }
        }
        Ok(Rollout {
            model,
            exo,
            dynamics,
            weights: CostWeights::new(model, exo),
            readers,
            n,
            h: model.horizon(),
        })
    }

    /// Temperatures `[zone * T + t]` for flows `[zone * T + t]`.
    fn simulate(&self, m: &[S], temps: &mut [S]) {
        let mut cur = self.model.initial_temps();
        let mut x = vec![S::zero(); self.n];
        for t in 0..self.h {
            for i in 0..self.n {
                temps[i * self.h + t] = cur[i];
                x[i] = bilinear_cooling(m[i * self.h + t], cur[i], self.exo.t_supply[t]);
            }
            if t + 1 < self.h {
                cur = self.dynamics.step(&cur, &x, t);
            }
        }
    }

    fn cost(&self, m: &[S], temps: &[S]) -> S {
        let w = &self.weights;
        let mut f = S::zero();
        for t in 0..self.h {
            let mut total = S::zero();
            for i in 0..self.n {
                let k = i * self.h + t;
                total += m[k];
                f += w.x_weight[t] * m[k] * (temps[k] - self.exo.t_supply[t]);
            }
            f += w.y_linear[t] * total + w.y_cubic[t] * total * total * total;
        }
        f
    }

    /// Augmented Lagrangian of the comfort band; gradient into `g`.
    fn eval(&self, m: &[S], comfort: Option<&Comfort<S>>, temps: &mut [S], adj: &mut [S], g: &mut [S]) -> S {
        self.simulate(m, temps);
        let w = &self.weights;
        let mut f = self.cost(m, temps);
        // dℓ/dT into adj, dℓ/dm into g
        for t in 0..self.h {
            let total = (0..self.n).fold(S::zero(), |acc, i| acc + m[i * self.h + t]);
            let fan = S::of(3.0) * w.y_cubic[t] * total * total;
            for i in 0..self.n {
                let k = i * self.h + t;
                g[k] = w.y_linear[t] + fan + w.x_weight[t] * (temps[k] - self.exo.t_supply[t]);
                adj[k] = w.x_weight[t] * m[k];
            }
        }
        if let Some(c) = comfort {
            let two_rho = S::of(2.0) * c.rho;
            for (i, z) in self.model.zones().iter().enumerate() {
                for t in 1..self.h {
                    let k = i * self.h + t;
                    let vh = (c.hi[k] + c.rho * (temps[k] - z.t_max)).max(S::zero());
                    let vl = (c.lo[k] + c.rho * (z.t_min - temps[k])).max(S::zero());
                    f += (vh * vh - c.hi[k] * c.hi[k] + vl * vl - c.lo[k] * c.lo[k]) / two_rho;
                    adj[k] += vh - vl;
                }
            }
        }
        self.backward(m, temps, adj, g);
        f
    }

    /// Turn the partial derivatives in `adj` into total derivatives by a
    /// reverse sweep and add the flow sensitivities into `g`.
    fn backward(&self, m: &[S], temps: &[S], adj: &mut [S], g: &mut [S]) {
        let d = &self.dynamics;
        let h = self.h;
        for t in (0..h.saturating_sub(1)).rev() {
            for k in 0..self.n {
                let next = adj[k * h + t + 1];
                let mut through = (d.a_self[k] + d.c_self[k] * m[k * h + t]) * next;
                for &(i, a) in &self.readers[k] {
                    through += a * adj[i * h + t + 1];
                }
                adj[k * h + t] += through;
                g[k * h + t] += d.c_self[k] * (temps[k * h + t] - self.exo.t_supply[t]) * next;
            }
        }
    }

    /// Project onto flow bounds with each stage's total under the cap.
    fn project(&self, m: &mut [S]) {
        let zones = self.model.zones();
        let cap = self.model.ahu().m_total_max;
        let mut v = vec![S::zero(); self.n];
        for t in 0..self.h {
            for i in 0..self.n {
                let k = i * self.h + t;
                m[k] = m[k].max(zones[i].m_min).min(zones[i].m_max);
                v[i] = m[k];
            }
            let total: S = v.iter().copied().sum();
            if total <= cap {
                continue;
            }
            // shift down by theta until the clamped sum meets the cap
            let clamped = |theta: S| -> S {
                (0..self.n).fold(S::zero(), |acc, i| acc + (v[i] - theta).max(zones[i].m_min))
            };
            let mut lo = S::zero();
            let mut hi = v.iter().copied().fold(S::zero(), S::max);
            for _ in 0..200 {
                let mid = S::of(0.5) * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if clamped(mid) > cap {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            for i in 0..self.n {
                m[i * self.h + t] = (v[i] - hi).max(zones[i].m_min);
            }
        }
    }

    fn max_comfort_violation(&self, temps: &[S]) -> S {
        let mut worst = S::zero();
        for (i, z) in self.model.zones().iter().enumerate() {
            for t in 1..self.h {
                let k = i * self.h + t;
                worst = worst.max(temps[k] - z.t_max).max(z.t_min - temps[k]);
            }
        }
        worst
    }
}

fn flatten<S: Scalar>(rows: &[Vec<S>]) -> Vec<S> {
    rows.iter().flatten().copied().collect()
}

fn unflatten<S: Scalar>(m: &[S], h: usize) -> Vec<Vec<S>> {
    m.chunks(h).map(<[S]>::to_vec).collect()
}

struct LocalResult<S> {
    m: Vec<S>,
    outer: usize,
    inner: usize,
    stationarity: S,
    violation: S,
}

/// Spectral projected gradient with a nonmonotone Armijo search. Returns
/// the iteration count and the final projected-gradient norm.
fn spg<S: Scalar>(r: &Rollout<'_, S>, m: &mut Vec<S>, comfort: &Comfort<S>, tol: S, max_iter: usize) -> (usize, S) {
    const MEMORY: usize = 10;
    let n = m.len();
    let mut temps = vec![S::zero(); n];
    let mut adj = vec![S::zero(); n];
    let mut g = vec![S::zero(); n];
    let mut f = r.eval(m, Some(comfort), &mut temps, &mut adj, &mut g);
    let mut history = vec![f];
    let mut trial = vec![S::zero(); n];
    let mut g_new = vec![S::zero(); n];
    let mut dir = vec![S::zero(); n];
    let gmax = g.iter().fold(S::zero(), |acc, v| acc.max(v.abs()));
    let mut alpha = if gmax > S::zero() { S::one() / gmax } else { S::one() };
    let (a_min, a_max) = (S::of(1e-12), S::of(1e12));
    let mut pg = S::infinity();
    for k in 0..max_iter {
        for j in 0..n {
            trial[j] = m[j] - g[j];
        }
        r.project(&mut trial);
        pg = (0..n).fold(S::zero(), |acc, j| acc.max((trial[j] - m[j]).abs()));
        if pg <= tol {
            return (k, pg);
        }
        for j in 0..n {
            trial[j] = m[j] - alpha * g[j];
        }
        r.project(&mut trial);
        for j in 0..n {
            dir[j] = trial[j] - m[j];
        }
        let slope = (0..n).fold(S::zero(), |acc, j| acc + g[j] * dir[j]);
        let f_ref = history.iter().copied().fold(S::neg_infinity(), S::max);
        let mut lambda = S::one();
        let f_new = loop {
            for j in 0..n {
                trial[j] = m[j] + lambda * dir[j];
            }
            let fv = r.eval(&trial, Some(comfort), &mut temps, &mut adj, &mut g_new);
            if fv <= f_ref + S::of(1e-4) * lambda * slope || lambda < S::of(1e-14) {
                break fv;
            }
            lambda = lambda * S::of(0.5);
        };
        let mut ss = S::zero();
        let mut sy = S::zero();
        for j in 0..n {
            let s = trial[j] - m[j];
            ss += s * s;
            sy += s * (g_new[j] - g[j]);
        }
        alpha = if sy > S::zero() { (ss / sy).max(a_min).min(a_max) } else { a_max };
        std::mem::swap(m, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        history.push(f);
        if history.len() > MEMORY {
            history.remove(0);
        }
    }
    (max_iter, pg)
}

fn local_solve<S: Scalar>(r: &Rollout<'_, S>, start: &[S], opts: &NonlinearOptions<S>) -> LocalResult<S> {
    let n = start.len();
    let mut m = start.to_vec();
    r.project(&mut m);
    let mut comfort = Comfort {
        hi: vec![S::zero(); n],
        lo: vec![S::zero(); n],
        rho: S::of(10.0),
    };
    let mut temps = vec![S::zero(); n];
    let mut inner_total = 0;
    let mut prev = S::infinity();
    let mut stationarity = S::infinity();
    let mut violation = S::infinity();
    let mut outer = 0;
    let mut inner_tol = S::of(1e-3).max(opts.stationarity_tol);
    while outer < opts.max_outer {
        outer += 1;
        let (it, pg) = spg(r, &mut m, &comfort, inner_tol, opts.max_inner);
        inner_total += it;
        stationarity = pg;
        r.simulate(&m, &mut temps);
        violation = r.max_comfort_violation(&temps).max(S::zero());
        for (i, z) in r.model.zones().iter().enumerate() {
            for t in 1..r.h {
                let k = i * r.h + t;
                comfort.hi[k] = (comfort.hi[k] + comfort.rho * (temps[k] - z.t_max)).max(S::zero());
                comfort.lo[k] = (comfort.lo[k] + comfort.rho * (z.t_min - temps[k])).max(S::zero());
            }
        }
        if violation <= opts.tol && pg <= opts.stationarity_tol {
            break;
        }
        if violation > S::of(0.25) * prev && comfort.rho < S::of(1e8) {
            comfort.rho = comfort.rho * S::of(10.0);
        }
        prev = violation;
        inner_tol = (inner_tol * S::of(0.1)).max(opts.stationarity_tol);
    }
    LocalResult {
        m,
        outer,
        inner: inner_total,
        stationarity,
        violation,
    }
}

/// Gradient of the bilinear cost with respect to the flows `[zone][stage]`,
/// through the temperature rollout.
pub fn flow_gradient<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    flows: &[Vec<S>],
) -> Result<Vec<Vec<S>>, BaselineError> {
    let r = Rollout::new(model, exo)?;
    let m = flatten(flows);
    let n = m.len();
    let mut temps = vec![S::zero(); n];
    let mut adj = vec![S::zero(); n];
    let mut g = vec![S::zero(); n];
    r.eval(&m, None, &mut temps, &mut adj, &mut g);
    Ok(unflatten(&g, r.h))
}

fn starting_points<S: Scalar>(
    r: &Rollout<'_, S>,
    opts: &NonlinearOptions<S>,
) -> Result<Vec<Vec<S>>, BaselineError> {
    let zones = r.model.zones();
    let h = r.h;
    let mut starts: Vec<Vec<S>> = opts.warm_starts.iter().map(|w| flatten(w)).collect();
    if starts.iter().any(|s| s.len() != r.n * h) {
        return Err(BaselineError::InvalidOptions("warm start shape does not match the model".into()));
    }
    if opts.relaxation_start {
        let problem = RelaxedProblem::new(r.model, r.exo, RelaxOptions::default())?;
        let central = CentralOptions {
            tol: S::of(1e-6),
            ..CentralOptions::default()
        };
        if let Ok(sol) = solve_relaxed_problem(&problem, &central) {
            let point = sol.relaxed.expect("relaxed method returns a point");
            let x: Vec<Vec<S>> = point.agents.iter().map(|a| a.x_cool.clone()).collect();
            let rec = recover_from_cooling(&x, r.model, r.exo, RecoverOptions::default())?;
            starts.push(flatten(&rec.flows));
        }
    }
    let per_zone = |f: &dyn Fn(&crate::model::ZoneParams<S>) -> S| -> Vec<S> {
        zones.iter().flat_map(|z| std::iter::repeat_n(f(z), h)).collect()
    };
    starts.push(per_zone(&|z| z.m_max));
    starts.push(per_zone(&|z| S::of(0.5) * (z.m_min + z.m_max)));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let s = zones
            .iter()
            .flat_map(|z| {
                (0..h)
                    .map(|_| z.m_min + (z.m_max - z.m_min) * S::of(rng.random::<f64>()))
                    .collect::<Vec<_>>()
            })
            .collect();
        starts.push(s);
    }
    Ok(starts)
}

/// Best local optimum of the bilinear problem over several starts.
///
/// Starts are the caller's warm starts, the recovered centralized
/// relaxation, all-maximum and mid-range flows, and `restarts` seeded random
/// points. The cheapest schedule that meets every constraint wins; ties go to
/// the lexicographically smaller flow vector.
pub fn solve_centralized_nonlinear<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    opts: &NonlinearOptions<S>,
) -> Result<ReferenceSolution<S>, BaselineError> {
    let clock = Instant::now();
    let floor: S = model.zones().iter().map(|z| z.m_min).sum();
    if floor > model.ahu().m_total_max {
        return Err(BaselineError::Infeasible {
            family: "ahu cap".into(),
            violation: (floor - model.ahu().m_total_max).as_f64(),
        });
    }
    let r = Rollout::new(model, exo)?;
    let starts = starting_points(&r, opts)?;
    let results: Vec<(LocalResult<S>, Schedule<S>)> = starts
        .par_iter()
        .map(|s| {
            let res = local_solve(&r, s, opts);
            let sched = schedule_from_flows(model, exo, unflatten(&res.m, r.h))?;
            Ok((res, sched))
        })
        .collect::<Result<_, BaselineError>>()?;
    let tried = results.len();
    let mut best: Option<&(LocalResult<S>, Schedule<S>)> = None;
    let mut feasible = 0;
    for cand in &results {
        if !cand.1.violations.is_feasible() {
            continue;
        }
        feasible += 1;
        let better = match best {
            None => true,
            Some(b) => {
                let (c, bc) = (cand.1.cost.total, b.1.cost.total);
                c < bc || (c == bc && lex_less(&cand.1.flows, &b.1.flows))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let Some((res, sched)) = best else {
        let worst = results
            .iter()
            .map(|(l, _)| l.violation)
            .fold(S::infinity(), S::min);
        return Err(BaselineError::AllStartsFailed(format!(
            "{tried} starts, smallest comfort violation {}",
            worst
        )));
    };
    Ok(ReferenceSolution {
        method: Method::CentralizedNonlinear,
        objective: sched.cost.total,
        schedule: Some(sched.clone()),
        relaxed: None,
        diagnostics: Diagnostics {
            outer_iterations: res.outer,
            inner_iterations: res.inner,
            max_violation: res.violation.as_f64(),
            stationarity: res.stationarity.as_f64(),
            starts_tried: tried,
            starts_feasible: feasible,
            evaluated: 0,
            wall_clock_s: clock.elapsed().as_secs_f64(),
            local_only: true,
        },
    })
}
