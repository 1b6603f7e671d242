//! Subproblem of one zone agent.
//!
//! With every other agent frozen, the zone minimizes a convex quadratic
//! (linear cooling cost plus multiplier and penalty terms of every coupled row
//! it appears in) over its local feasible set. The set is a product of
//! per-stage simplices, so projection is exact and cheap; the solver is an
//! accelerated projected gradient method with adaptive restart, followed by
//! conjugate-gradient refinement on the identified faces.

use super::IterateState;
use crate::relax::{AgentTrajectory, Feature, LocalFeasibleSet, RelaxedProblem};
use crate::scalar::{dot, Scalar};

/// Linear map from a zone's stacked vector to every coupled row it enters.
///
/// Row layout: own dynamics rows (`T-1`), one block of `T-1` rows per zone
/// whose dynamics contain this zone, flow rows (`T`), cap rows (`T`).
#[derive(Debug, Clone)]
pub struct ZoneOperator<S> {
    zone: usize,
    horizon: usize,
    a: S,
    c: S,
    /// `(j, A^ji)` for every zone `j` whose dynamics contain this zone.
    appears_in: Vec<(usize, S)>,
    /// Upper estimate of the largest eigenvalue of `AᵀA`.
    gram_max: S,
}

impl<S: Scalar> ZoneOperator<S> {
    pub fn new(problem: &RelaxedProblem<S>, zone: usize) -> Self {
        let sys = &problem.system;
        let [a, _, c] = sys.a_bar_self(zone);
        let mut op = ZoneOperator {
            zone,
            horizon: problem.horizon(),
            a,
            c,
            appears_in: sys.appears_in(zone).to_vec(),
            gram_max: S::zero(),
        };
        op.gram_max = op.estimate_gram_max();
        op
    }

    pub fn zone(&self) -> usize {
        self.zone
    }

    pub fn gram_max(&self) -> S {
        self.gram_max
    }

    fn dyn_rows(&self) -> usize {
        self.horizon.saturating_sub(1)
    }

    pub fn n_rows(&self) -> usize {
        (1 + self.appears_in.len()) * self.dyn_rows() + 2 * self.horizon
    }

    pub fn n_vars(&self) -> usize {
        3 * self.horizon
    }

    /// `rows = A x`.
    pub fn apply(&self, x: &[S], rows: &mut [S]) {
        let h = self.horizon;
        let nr = self.dyn_rows();
        for t in 0..nr {
            rows[t] = self.a * x[3 * t] + self.c * x[3 * t + 2] - x[3 * t + 3];
        }
        for (k, &(_, a_ji)) in self.appears_in.iter().enumerate() {
            let base = (1 + k) * nr;
            for t in 0..nr {
                rows[base + t] = a_ji * x[3 * t];
            }
        }
        let base = (1 + self.appears_in.len()) * nr;
        for t in 0..h {
            rows[base + t] = x[3 * t + 1];
            rows[base + h + t] = x[3 * t + 1];
        }
    }

    /// `g = Aᵀ rows`.
    pub fn apply_t(&self, rows: &[S], g: &mut [S]) {
        let h = self.horizon;
        let nr = self.dyn_rows();
        g.iter_mut().for_each(|v| *v = S::zero());
        for t in 0..nr {
            let r = rows[t];
            g[3 * t] += self.a * r;
            g[3 * t + 2] += self.c * r;
            g[3 * t + 3] -= r;
        }
        for (k, &(_, a_ji)) in self.appears_in.iter().enumerate() {
            let base = (1 + k) * nr;
            for t in 0..nr {
                g[3 * t] += a_ji * rows[base + t];
            }
        }
        let base = (1 + self.appears_in.len()) * nr;
        for t in 0..h {
            g[3 * t + 1] += rows[base + t] + rows[base + h + t];
        }
    }

    /// `out = AᵀA v`.
    pub fn gram_apply(&self, v: &[S], out: &mut [S]) {
        let mut rows = vec![S::zero(); self.n_rows()];
        self.apply(v, &mut rows);
        self.apply_t(&rows, out);
    }

    fn estimate_gram_max(&self) -> S {
        let n = self.n_vars();
        let mut v: Vec<S> = (0..n).map(|k| S::one() + S::of(0.1 * (k as f64 * 0.7).sin())).collect();
        let mut w = vec![S::zero(); n];
        let mut lambda = S::zero();
        let mut converged = false;
        for _ in 0..2000 {
            let norm = dot(&v, &v).sqrt();
            if norm == S::zero() {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            self.gram_apply(&v, &mut w);
            let next = dot(&v, &w);
            std::mem::swap(&mut v, &mut w);
            if (next - lambda).abs() <= S::of(1e-10) * next.abs() {
                lambda = next;
                converged = true;
                break;
            }
            lambda = next;
        }
        if converged {
            lambda * S::of(1.02)
        } else {
            lambda.max(self.gershgorin())
        }
    }

    /// Row-sum bound on the largest eigenvalue of `AᵀA` (`‖A‖₁‖A‖∞`).
    fn gershgorin(&self) -> S {
        let nb: S = self.appears_in.iter().fold(S::zero(), |acc, &(_, v)| acc + v.abs());
        let nb_max = self.appears_in.iter().fold(S::zero(), |acc, &(_, v)| acc.max(v.abs()));
        let col = (self.a.abs() + S::one() + nb).max(self.c.abs()).max(S::of(2.0));
        let row = (self.a.abs() + self.c.abs() + S::one()).max(nb_max).max(S::one());
        col * row
    }
}

/// Quadratic objective of one zone subproblem at a fixed snapshot.
#[derive(Debug, Clone)]
pub struct ZoneQp<'a, S> {
    op: &'a ZoneOperator<S>,
    rho: S,
    x_weight: &'a [S],
    /// Contribution of frozen agents to each row.
    offset: Vec<S>,
    /// Multiplier of each row.
    mult: Vec<S>,
}

impl<'a, S: Scalar> ZoneQp<'a, S> {
    pub fn new(op: &'a ZoneOperator<S>, problem: &'a RelaxedProblem<S>, snapshot: &IterateState<S>, rho: S) -> Self {
        let i = op.zone;
        let h = op.horizon;
        let nr = op.dyn_rows();
        let sys = &problem.system;
        let agents = &snapshot.agents;
        let mu = &snapshot.multipliers;
        let mut offset = Vec::with_capacity(op.n_rows());
        let mut mult = Vec::with_capacity(op.n_rows());
        let me = &agents[i];
        for t in 0..nr {
            let coupled = sys
                .a_neighbor(i)
                .iter()
                .fold(S::zero(), |acc, &(j, a)| acc + a * agents[j].temps[t]);
            offset.push(coupled - sys.b(i)[t]);
        }
        mult.extend_from_slice(&mu.lambda[i]);
        for &(j, a_ji) in &op.appears_in {
            let full = sys.dyn_residual(j, agents);
            offset.extend((0..nr).map(|t| full[t] - a_ji * me.temps[t]));
            mult.extend_from_slice(&mu.lambda[j]);
        }
        let y = &snapshot.coordinator.y_total;
        let cap = sys.c();
        let others: Vec<S> = (0..h)
            .map(|t| {
                agents
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != i)
                    .fold(S::zero(), |acc, (_, a)| acc + a.flows[t])
            })
            .collect();
        offset.extend((0..h).map(|t| others[t] - y[t] + snapshot.s1[t]));
        mult.extend_from_slice(&mu.gamma);
        offset.extend((0..h).map(|t| others[t] - cap[t] + snapshot.s2[t]));
        mult.extend_from_slice(&mu.eta);
        ZoneQp {
            op,
            rho,
            x_weight: &problem.x_weight,
            offset,
            mult,
        }
    }

    /// Values of every coupled row at `x`.
    pub fn rows(&self, x: &[S]) -> Vec<S> {
        let mut r = vec![S::zero(); self.op.n_rows()];
        self.op.apply(x, &mut r);
        for (v, &o) in r.iter_mut().zip(&self.offset) {
            *v += o;
        }
        r
    }

    pub fn value(&self, x: &[S]) -> S {
        let r = self.rows(x);
        let half = S::of(0.5) * self.rho;
        let linear = (0..self.op.horizon).fold(S::zero(), |acc, t| acc + self.x_weight[t] * x[3 * t + 2]);
        r.iter()
            .zip(&self.mult)
            .fold(linear, |acc, (&r, &m)| acc + m * r + half * r * r)
    }

    pub fn gradient(&self, x: &[S], g: &mut [S]) {
        let mut r = self.rows(x);
        for (v, &m) in r.iter_mut().zip(&self.mult) {
            *v = m + self.rho * *v;
        }
        self.op.apply_t(&r, g);
        for t in 0..self.op.horizon {
            g[3 * t + 2] += self.x_weight[t];
        }
    }

    pub fn hessian_apply(&self, v: &[S], out: &mut [S]) {
        self.op.gram_apply(v, out);
        out.iter_mut().for_each(|x| *x *= self.rho);
    }

    pub fn lipschitz(&self) -> S {
        (self.rho * self.op.gram_max).max(S::min_positive_value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemOptions<S> {
    /// Bound on the gradient-mapping infinity norm.
    pub tol: S,
    pub max_iters: usize,
    /// Face refinement period in iterations (0 disables it).
    pub refine_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSolve<S> {
    pub x: Vec<S>,
    pub iterations: usize,
    pub gradient_mapping: S,
    pub converged: bool,
}

fn inf_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

/// `out = P(x - g / L)`; returns the gradient-mapping norm `L‖x - out‖∞`.
fn prox_step<S: Scalar>(set: &LocalFeasibleSet<S>, x: &[S], g: &[S], l: S, out: &mut [S], feats: &mut [Feature]) -> S {
    for k in 0..x.len() {
        out[k] = x[k] - g[k] / l;
    }
    set.project_into(out, feats);
    l * inf_dist(x, out)
}

/// Minimize `qp` over `set` from `x0`.
pub fn minimize_zone<S: Scalar>(
    qp: &ZoneQp<'_, S>,
    set: &LocalFeasibleSet<S>,
    x0: &[S],
    opts: SubproblemOptions<S>,
) -> ZoneSolve<S> {
    let n = x0.len();
    let l = qp.lipschitz();
    let mut feats = vec![0 as Feature; set.horizon()];
    let mut x = x0.to_vec();
    set.project_into(&mut x, &mut feats);
    // A feasible start on a face comes back perturbed by rounding; keep it.
    let scale = x0.iter().fold(S::one(), |acc, v| acc.max(v.abs()));
    if inf_dist(&x, x0) <= S::of(64.0) * S::epsilon() * scale {
        x.copy_from_slice(x0);
    }
    let mut g = vec![S::zero(); n];
    let mut xn = vec![S::zero(); n];
    qp.gradient(&x, &mut g);
    let gm = prox_step(set, &x, &g, l, &mut xn, &mut feats);
    if gm <= opts.tol {
        return ZoneSolve {
            x,
            iterations: 0,
            gradient_mapping: gm,
            converged: true,
        };
    }
    let mut y = x.clone();
    let mut momentum = S::one();
    let mut last_gm = gm;
    for k in 1..=opts.max_iters {
        qp.gradient(&y, &mut g);
        let gm = prox_step(set, &y, &g, l, &mut xn, &mut feats);
        last_gm = gm;
        if gm <= opts.tol {
            return ZoneSolve {
                x: xn,
                iterations: k,
                gradient_mapping: gm,
                converged: true,
            };
        }
        // Restart when the step opposes the momentum direction.
        let mut along = S::zero();
        for j in 0..n {
            along += (y[j] - xn[j]) * (xn[j] - x[j]);
        }
        if along > S::zero() {
            momentum = S::one();
            y.copy_from_slice(&xn);
        } else {
            let next = (S::one() + (S::one() + S::of(4.0) * momentum * momentum).sqrt()) * S::of(0.5);
            let beta = (momentum - S::one()) / next;
            for j in 0..n {
                y[j] = xn[j] + beta * (xn[j] - x[j]);
            }
            momentum = next;
        }
        std::mem::swap(&mut x, &mut xn);
        if opts.refine_every > 0 && (k == 1 || k % opts.refine_every == 0) {
            if let Some(better) = refine_on_faces(qp, set, &x, &feats) {
                x = better;
                y.copy_from_slice(&x);
                momentum = S::one();
            }
        }
    }
    ZoneSolve {
        x,
        iterations: opts.max_iters,
        gradient_mapping: last_gm,
        converged: false,
    }
}

/// Minimize the quadratic on the affine hull of the current faces by
/// conjugate gradients, then project back. Returns the result only if it
/// lowers the objective.
fn refine_on_faces<S: Scalar>(
    qp: &ZoneQp<'_, S>,
    set: &LocalFeasibleSet<S>,
    x: &[S],
    feats: &[Feature],
) -> Option<Vec<S>> {
    let n = x.len();
    let bases: Vec<Vec<[S; 3]>> = set
        .stages
        .iter()
        .zip(feats)
        .map(|(s, &f)| s.region.feature_basis(f))
        .collect();
    let dim: usize = bases.iter().map(|b| b.len()).sum();
    if dim == 0 {
        return None;
    }
    let expand = |z: &[S], out: &mut [S]| {
        out.iter_mut().for_each(|v| *v = S::zero());
        let mut k = 0;
        for (t, b) in bases.iter().enumerate() {
            for e in b {
                for d in 0..3 {
                    out[3 * t + d] += z[k] * e[d];
                }
                k += 1;
            }
        }
    };
    let reduce = |v: &[S], out: &mut [S]| {
        let mut k = 0;
        for (t, b) in bases.iter().enumerate() {
            for e in b {
                out[k] = e[0] * v[3 * t] + e[1] * v[3 * t + 1] + e[2] * v[3 * t + 2];
                k += 1;
            }
        }
    };
    let mut g = vec![S::zero(); n];
    qp.gradient(x, &mut g);
    let mut r = vec![S::zero(); dim];
    reduce(&g, &mut r);
    r.iter_mut().for_each(|v| *v = -*v);
    let mut p = r.clone();
    let mut z = vec![S::zero(); dim];
    let mut full = vec![S::zero(); n];
    let mut hfull = vec![S::zero(); n];
    let mut q = vec![S::zero(); dim];
    let mut rr = dot(&r, &r);
    let stop = rr * S::of(1e-24);
    for _ in 0..(2 * dim) {
        if rr <= stop || rr == S::zero() {
            break;
        }
        expand(&p, &mut full);
        qp.hessian_apply(&full, &mut hfull);
        reduce(&hfull, &mut q);
        let pq = dot(&p, &q);
        if pq <= S::epsilon() * dot(&p, &p) * qp.lipschitz() {
            break;
        }
        let alpha = rr / pq;
        for k in 0..dim {
            z[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..dim {
            p[k] = r[k] + beta * p[k];
        }
    }
    expand(&z, &mut full);
    let f0 = qp.value(x);
    let mut scale = S::one();
    let mut cand = vec![S::zero(); n];
    for _ in 0..4 {
        for k in 0..n {
            cand[k] = x[k] + scale * full[k];
        }
        set.project(&mut cand);
        if qp.value(&cand) < f0 {
            return Some(cand);
        }
        scale *= S::of(0.25);
    }
    None
}

/// Per-zone operators, built once per problem and reused across iterations.
#[derive(Debug, Clone)]
pub struct ZoneSolvers<S> {
    pub operators: Vec<ZoneOperator<S>>,
}

impl<S: Scalar> ZoneSolvers<S> {
    pub fn new(problem: &RelaxedProblem<S>) -> Self {
        ZoneSolvers {
            operators: (0..problem.n_zones()).map(|i| ZoneOperator::new(problem, i)).collect(),
        }
    }

    /// Solve zone `i` against `snapshot`, warm-started at the snapshot's own trajectory.
    pub fn solve(
        &self,
        i: usize,
        snapshot: &IterateState<S>,
        problem: &RelaxedProblem<S>,
        rho: S,
        opts: SubproblemOptions<S>,
    ) -> (AgentTrajectory<S>, ZoneSolve<S>) {
        let qp = ZoneQp::new(&self.operators[i], problem, snapshot, rho);
        let x0 = snapshot.agents[i].to_stacked();
        let sol = minimize_zone(&qp, &problem.local_sets[i], &x0, opts);
        (AgentTrajectory::from_stacked(&sol.x), sol)
    }
}
