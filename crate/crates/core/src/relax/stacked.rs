//! Stacked per-agent form of the relaxed problem.
//!
//! Agent `i` owns `x^i = (T_0, m_0, X_0, ..., T_{T-1}, m_{T-1}, X_{T-1})`.
//! Dynamics row `t` of zone `i` (for `t < T-1`) reads
//! `A^ii T^i_t + C^ii X^i_t - T^i_{t+1} + Σ_j A^ij T^j_t = -D^ii_t`.
//! The flow rows read `Σ_i m^i_t - Y_t + s1_t = 0` and
//! `Σ_i m^i_t - m_cap + s2_t = 0`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::feasible::STAGE_VARS;
use super::RelaxError;
use crate::model::{BuildingModel, DiscreteDynamics};
use crate::scalar::Scalar;

/// Zone trajectory over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrajectory<S = f64> {
    pub temps: Vec<S>,
    pub flows: Vec<S>,
    pub x_cool: Vec<S>,
}

impl<S: Scalar> AgentTrajectory<S> {
    pub fn horizon(&self) -> usize {
        self.temps.len()
    }

    pub fn to_stacked(&self) -> Vec<S> {
        let mut x = Vec::with_capacity(STAGE_VARS * self.horizon());
        for t in 0..self.horizon() {
            x.extend_from_slice(&[self.temps[t], self.flows[t], self.x_cool[t]]);
        }
        x
    }

    pub fn from_stacked(x: &[S]) -> Self {
        assert_eq!(x.len() % STAGE_VARS, 0);
        AgentTrajectory {
            temps: x.iter().step_by(3).copied().collect(),
            flows: x.iter().skip(1).step_by(3).copied().collect(),
            x_cool: x.iter().skip(2).step_by(3).copied().collect(),
        }
    }
}

/// Total-flow trajectory of the virtual AHU agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatorTrajectory<S = f64> {
    pub y_total: Vec<S>,
}

/// Row-major dense matrix used for small systems and debug output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    /// `out += self * x`.
    pub fn mul_add(&self, x: &[S], out: &mut [S]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(x).fold(S::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != S::zero())
            .map(move |(k, &v)| (k / self.cols, k % self.cols, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseBlocks<S> {
    a_self: Vec<DenseMatrix<S>>,
    a_neighbor: Vec<Vec<(usize, DenseMatrix<S>)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Materialize dense blocks when `zones * horizon` is at most this value.
    pub dense_threshold: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { dense_threshold: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem<S> {
    horizon: usize,
    /// `(A^ii, 0, C^ii)` per zone.
    a_bar_self: Vec<[S; 3]>,
    /// Per zone `(j, A^ij)` in row `i`.
    a_neighbor: Vec<Vec<(usize, S)>>,
    /// Per zone `(j, A^ji)`: rows of other zones in which zone `i` appears.
    appears_in: Vec<Vec<(usize, S)>>,
    /// `[zone][row]`, entries `-D^ii_t`.
    b: Vec<Vec<S>>,
    /// AHU cap per stage.
    c: Vec<S>,
    dense: Option<DenseBlocks<S>>,
}

pub fn assemble_stacked<S: Scalar>(
    dynamics: &DiscreteDynamics<S>,
    model: &BuildingModel<S>,
    options: AssemblyOptions,
) -> Result<StackedSystem<S>, RelaxError> {
    let n = model.n_zones();
    let h = model.horizon();
    if dynamics.n_zones() != n {
        return Err(RelaxError::Dimension(format!(
            "dynamics describe {} zones, building has {n}",
            dynamics.n_zones()
        )));
    }
    if dynamics.d_const.iter().any(|d| d.len() != h) {
        return Err(RelaxError::Dimension(format!(
            "dynamics offsets do not span the {h}-stage horizon"
        )));
    }
    let rows = h.saturating_sub(1);
    let mut appears_in: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    for (j, list) in dynamics.a_neighbor.iter().enumerate() {
        for &(i, a) in list {
            if i >= n {
                return Err(RelaxError::Dimension(format!("neighbor index {i} out of range")));
            }
            appears_in[i].push((j, a));
        }
    }
    for list in &mut appears_in {
        list.sort_by_key(|&(j, _)| j);
    }
    let mut sys = StackedSystem {
        horizon: h,
        a_bar_self: (0..n)
            .map(|i| [dynamics.a_self[i], S::zero(), dynamics.c_self[i]])
            .collect(),
        a_neighbor: dynamics.a_neighbor.clone(),
        appears_in,
        b: dynamics
            .d_const
            .iter()
            .map(|d| d[..rows].iter().map(|&v| -v).collect())
            .collect(),
        c: vec![model.ahu().m_total_max; h],
        dense: None,
    };
    if n * h <= options.dense_threshold {
        let a_self = (0..n).map(|i| sys.a_self_dense(i)).collect();
        let a_neighbor = (0..n)
            .map(|i| {
                sys.a_neighbor[i]
                    .iter()
                    .map(|&(j, _)| (j, sys.a_neighbor_dense(i, j)))
                    .collect()
            })
            .collect();
        sys.dense = Some(DenseBlocks { a_self, a_neighbor });
    }
    Ok(sys)
}

impl<S: Scalar> StackedSystem<S> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_zones(&self) -> usize {
        self.a_bar_self.len()
    }

    /// Number of dynamics rows per zone.
    pub fn n_rows(&self) -> usize {
        self.horizon.saturating_sub(1)
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn a_bar_self(&self, i: usize) -> [S; 3] {
        self.a_bar_self[i]
    }

    pub fn a_neighbor(&self, i: usize) -> &[(usize, S)] {
        &self.a_neighbor[i]
    }

    /// `(j, A^ji)` for every zone `j` whose dynamics contain zone `i`.
    pub fn appears_in(&self, i: usize) -> &[(usize, S)] {
        &self.appears_in[i]
    }

    pub fn b(&self, i: usize) -> &[S] {
        &self.b[i]
    }

    pub fn c(&self) -> &[S] {
        &self.c
    }

    /// `A_d^ii x^i + Σ_j A_d^ij x^j - b_d^i` for zone `i`.
    pub fn dyn_residual(&self, i: usize, agents: &[AgentTrajectory<S>]) -> Vec<S> {
        match &self.dense {
            Some(d) => {
                let mut r: Vec<S> = self.b[i].iter().map(|&v| -v).collect();
                d.a_self[i].mul_add(&agents[i].to_stacked(), &mut r);
                for (j, m) in &d.a_neighbor[i] {
                    m.mul_add(&agents[*j].to_stacked(), &mut r);
                }
                r
            }
            None => self.dyn_residual_banded(i, agents),
        }
    }

    fn dyn_residual_banded(&self, i: usize, agents: &[AgentTrajectory<S>]) -> Vec<S> {
        let [a, _, c] = self.a_bar_self[i];
        let me = &agents[i];
        (0..self.n_rows())
            .map(|t| {
                let coupled = self.a_neighbor[i]
                    .iter()
                    .fold(S::zero(), |acc, &(j, aij)| acc + aij * agents[j].temps[t]);
                a * me.temps[t] + c * me.x_cool[t] - me.temps[t + 1] + coupled - self.b[i][t]
            })
            .collect()
    }

    /// `Σ_i B_d^i x^i + B_d^0 x^0 + s1`.
    pub fn flow_residual(&self, agents: &[AgentTrajectory<S>], y: &[S], s1: &[S]) -> Vec<S> {
        (0..self.horizon)
            .map(|t| total_flow(agents, t) - y[t] + s1[t])
            .collect()
    }

    /// `Σ_i B_d^i x^i - c_d + s2`.
    pub fn cap_residual(&self, agents: &[AgentTrajectory<S>], s2: &[S]) -> Vec<S> {
        (0..self.horizon)
            .map(|t| total_flow(agents, t) - self.c[t] + s2[t])
            .collect()
    }

    pub fn a_self_dense(&self, i: usize) -> DenseMatrix<S> {
        let h = self.horizon;
        let mut m = DenseMatrix::zeros(self.n_rows(), STAGE_VARS * h);
        for t in 0..self.n_rows() {
            for k in 0..3 {
                m.set(t, 3 * t + k, self.a_bar_self[i][k]);
            }
            m.set(t, 3 * (t + 1), -S::one());
        }
        m
    }

    pub fn a_neighbor_dense(&self, i: usize, j: usize) -> DenseMatrix<S> {
        let mut m = DenseMatrix::zeros(self.n_rows(), STAGE_VARS * self.horizon);
        if let Some(&(_, a)) = self.a_neighbor[i].iter().find(|&&(k, _)| k == j) {
            for t in 0..self.n_rows() {
                m.set(t, 3 * t, a);
            }
        }
        m
    }

    /// Flow selector: `(B x^i)_t = m^i_t`.
    pub fn b_flow_dense(&self) -> DenseMatrix<S> {
        let mut m = DenseMatrix::zeros(self.horizon, STAGE_VARS * self.horizon);
        for t in 0..self.horizon {
            m.set(t, 3 * t + 1, S::one());
        }
        m
    }

    /// Coordinator selector, minus identity.
    pub fn b_coord_dense(&self) -> DenseMatrix<S> {
        let mut m = DenseMatrix::zeros(self.horizon, self.horizon);
        for t in 0..self.horizon {
            m.set(t, t, -S::one());
        }
        m
    }

    /// Plain-text listing of every block in matrix-market coordinate style
    /// (1-based indices), for diffing against hand calculations.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        let block = |w: &mut W, name: String, m: &DenseMatrix<S>| -> io::Result<()> {
            let nz: Vec<_> = m.nonzeros().collect();
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "% {name}")?;
            writeln!(w, "{} {} {}", m.rows, m.cols, nz.len())?;
            for (r, c, v) in nz {
                writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
            }
            Ok(())
        };
        for i in 0..self.n_zones() {
            block(&mut w, format!("A_d[{i},{i}]"), &self.a_self_dense(i))?;
            for &(j, _) in &self.a_neighbor[i] {
                block(&mut w, format!("A_d[{i},{j}]"), &self.a_neighbor_dense(i, j))?;
            }
            let mut b = DenseMatrix::zeros(self.n_rows(), 1);
            for (t, &v) in self.b[i].iter().enumerate() {
                b.set(t, 0, v);
            }
            block(&mut w, format!("b_d[{i}]"), &b)?;
        }
        block(&mut w, "B_d[zone]".into(), &self.b_flow_dense())?;
        block(&mut w, "B_d[0]".into(), &self.b_coord_dense())?;
        let mut c = DenseMatrix::zeros(self.horizon, 1);
        for (t, &v) in self.c.iter().enumerate() {
            c.set(t, 0, v);
        }
        block(&mut w, "c_d".into(), &c)
    }
}

#[inline]
pub(crate) fn total_flow<S: Scalar>(agents: &[AgentTrajectory<S>], t: usize) -> S {
    agents.iter().fold(S::zero(), |acc, a| acc + a.flows[t])
}
