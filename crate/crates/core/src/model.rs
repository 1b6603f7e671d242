//! Building physics: zone and AHU parameters, the thermal coupling graph,
//! explicit-Euler discretization of the RC network, and forward simulation.
//!
//! Units used throughout: capacitance in kJ/K, resistances in K/kW, flows in
//! kg/s, temperatures in °C, loads in kW and the step length in seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("zone {zone}: {reason}")]
    InvalidZone { zone: usize, reason: String },
    #[error("invalid AHU parameters: {0}")]
    InvalidAhu(String),
    #[error("coupling edge ({a}, {b}): {reason}")]
    InvalidEdge { a: usize, b: usize, reason: String },
    #[error("invalid building: {0}")]
    InvalidBuilding(String),
    #[error("zone {zone}: discretization unstable, self coefficient {a_self} outside (0, 1)")]
    Unstable { zone: usize, a_self: f64 },
    #[error("exogenous series: {0}")]
    InvalidExogenous(String),
}

/// Parameters of a single thermal zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams<S = f64> {
    /// Thermal capacitance of the zone air [kJ/K].
    pub capacitance: S,
    /// Zone-to-outside thermal resistance [K/kW].
    pub r_out: S,
    pub t_min: S,
    pub t_max: S,
    pub m_min: S,
    pub m_max: S,
    pub t_init: S,
}

impl<S: Scalar> ZoneParams<S> {
    pub fn validate(&self, zone: usize) -> Result<(), ModelError> {
        let bad = |reason: &str| {
            Err(ModelError::InvalidZone {
                zone,
                reason: reason.to_string(),
            })
        };
        let all = [
            self.capacitance,
            self.r_out,
            self.t_min,
            self.t_max,
            self.m_min,
            self.m_max,
            self.t_init,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.capacitance <= S::zero() {
            return bad("capacitance must be positive");
        }
        if self.r_out <= S::zero() {
            return bad("outside resistance must be positive");
        }
        if self.t_min >= self.t_max {
            return bad("comfort band is empty (t_min >= t_max)");
        }
        if self.m_min < S::zero() || self.m_min >= self.m_max {
            return bad("flow bounds must satisfy 0 <= m_min < m_max");
        }
        Ok(())
    }
}

/// Shared air handling unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhuParams<S = f64> {
    /// Fraction of return air in the mixed air stream.
    pub d_r: S,
    /// Reciprocal of the chiller COP.
    pub eta: S,
    /// Fan power coefficient [kW / (kg/s)^3].
    pub kappa_f: S,
    /// Total supply flow limit [kg/s].
    pub m_total_max: S,
    /// Specific heat of air [kJ/(kg K)].
    pub c_p: S,
}

impl<S: Scalar> AhuParams<S> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |r: &str| Err(ModelError::InvalidAhu(r.to_string()));
        if [self.d_r, self.eta, self.kappa_f, self.m_total_max, self.c_p]
            .iter()
            .any(|v| !v.is_finite())
        {
            return bad("non-finite parameter");
        }
        if self.d_r < S::zero() || self.d_r > S::one() {
            return bad("return-air fraction must lie in [0, 1]");
        }
        if self.eta <= S::zero() {
            return bad("eta must be positive");
        }
        if self.kappa_f < S::zero() {
            return bad("fan coefficient must be nonnegative");
        }
        if self.m_total_max <= S::zero() {
            return bad("total flow cap must be positive");
        }
        if self.c_p <= S::zero() {
            return bad("specific heat must be positive");
        }
        Ok(())
    }
}

/// Undirected thermal link between two zones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<S = f64> {
    pub a: usize,
    pub b: usize,
    /// Thermal resistance [K/kW].
    pub resistance: S,
}

/// The physical plant. Immutable once constructed; all invariants are
/// checked in [`BuildingModel::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BuildingDoc<S>",
    into = "BuildingDoc<S>",
    bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>")
)]
pub struct BuildingModel<S: Scalar = f64> {
    zones: Vec<ZoneParams<S>>,
    edges: Vec<Edge<S>>,
    /// Per-zone `(neighbor, resistance)` sorted by neighbor index.
    neighbors: Vec<Vec<(usize, S)>>,
    ahu: AhuParams<S>,
    dt: S,
    horizon: usize,
}

/// Plain serialized form of [`BuildingModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildingDoc<S> {
    pub dt: S,
    pub horizon: usize,
    pub ahu: AhuParams<S>,
    pub zones: Vec<ZoneParams<S>>,
    #[serde(default)]
    pub coupling: Vec<Edge<S>>,
}

impl<S: Scalar> TryFrom<BuildingDoc<S>> for BuildingModel<S> {
    type Error = ModelError;
    fn try_from(doc: BuildingDoc<S>) -> Result<Self, ModelError> {
        BuildingModel::new(doc.zones, doc.coupling, doc.ahu, doc.dt, doc.horizon)
    }
}

impl<S: Scalar> From<BuildingModel<S>> for BuildingDoc<S> {
    fn from(m: BuildingModel<S>) -> Self {
        BuildingDoc {
            dt: m.dt,
            horizon: m.horizon,
            ahu: m.ahu,
            zones: m.zones,
            coupling: m.edges,
        }
    }
}

impl<S: Scalar> BuildingModel<S> {
    pub fn new(
        zones: Vec<ZoneParams<S>>,
        edges: Vec<Edge<S>>,
        ahu: AhuParams<S>,
        dt: S,
        horizon: usize,
    ) -> Result<Self, ModelError> {
        if zones.is_empty() {
            return Err(ModelError::InvalidBuilding("no zones".into()));
        }
        if !(dt.is_finite() && dt > S::zero()) {
            return Err(ModelError::InvalidBuilding("step length must be positive".into()));
        }
        if horizon == 0 {
            return Err(ModelError::InvalidBuilding("horizon must be at least 1".into()));
        }
        for (i, z) in zones.iter().enumerate() {
            z.validate(i)?;
        }
        ahu.validate()?;

        let n = zones.len();
        let mut neighbors: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
        let mut canonical: Vec<Edge<S>> = Vec::with_capacity(edges.len());
        for e in &edges {
            let bad = |reason: &str| ModelError::InvalidEdge {
                a: e.a,
                b: e.b,
                reason: reason.to_string(),
            };
            if e.a >= n || e.b >= n {
                return Err(bad("zone index out of range"));
            }
            if e.a == e.b {
                return Err(bad("self-coupling"));
            }
            if !(e.resistance.is_finite() && e.resistance > S::zero()) {
                return Err(bad("resistance must be positive"));
            }
            let (a, b) = if e.a < e.b { (e.a, e.b) } else { (e.b, e.a) };
            if neighbors[a].iter().any(|&(j, _)| j == b) {
                return Err(bad("duplicate edge"));
            }
            neighbors[a].push((b, e.resistance));
            neighbors[b].push((a, e.resistance));
            canonical.push(Edge {
                a,
                b,
                resistance: e.resistance,
            });
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(j, _)| j);
        }
        canonical.sort_by_key(|e| (e.a, e.b));

        let model = BuildingModel {
            zones,
            edges: canonical,
            neighbors,
            ahu,
            dt,
            horizon,
        };
        for i in 0..n {
            let a = model.self_coefficient(i);
            if !(a > S::zero() && a < S::one()) {
                return Err(ModelError::Unstable {
                    zone: i,
                    a_self: a.as_f64(),
                });
            }
        }
        Ok(model)
    }

    pub fn zones(&self) -> &[ZoneParams<S>] {
        &self.zones
    }

    pub fn zone(&self, i: usize) -> &ZoneParams<S> {
        &self.zones[i]
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    /// `(neighbor, R_ij)` pairs of zone `i`, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> &[(usize, S)] {
        &self.neighbors[i]
    }

    /// Thermal resistance between two zones, if coupled.
    pub fn resistance(&self, i: usize, j: usize) -> Option<S> {
        self.neighbors[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, r)| r)
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn ahu(&self) -> &AhuParams<S> {
        &self.ahu
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    /// Step length in hours, used to price kW as kWh.
    pub fn dt_hours(&self) -> S {
        self.dt / S::of(3600.0)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_temps(&self) -> Vec<S> {
        self.zones.iter().map(|z| z.t_init).collect()
    }

    /// Same building over a different number of stages.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::InvalidBuilding("horizon must be at least 1".into()));
        }
        let mut m = self.clone();
        m.horizon = horizon;
        Ok(m)
    }

    /// Same building starting from another thermal state.
    pub fn with_initial_temps(&self, temps: &[S]) -> Result<Self, ModelError> {
        if temps.len() != self.zones.len() {
            return Err(ModelError::InvalidBuilding(format!(
                "expected {} initial temperatures, got {}",
                self.zones.len(),
                temps.len()
            )));
        }
        let mut m = self.clone();
        for (z, &t) in m.zones.iter_mut().zip(temps) {
            if !t.is_finite() {
                return Err(ModelError::InvalidBuilding("non-finite initial temperature".into()));
            }
            z.t_init = t;
        }
        Ok(m)
    }

    fn self_coefficient(&self, i: usize) -> S {
        let z = &self.zones[i];
        let coupling: S = self.neighbors[i]
            .iter()
            .map(|&(_, r)| self.dt / (r * z.capacitance))
            .sum();
        S::one() - (coupling + self.dt / (z.capacitance * z.r_out))
    }
}

/// Exogenous inputs over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries<S = f64> {
    /// Outdoor temperature per stage [°C].
    pub t_out: Vec<S>,
    /// Internal heat gain `[zone][stage]` [kW].
    pub q_load: Vec<Vec<S>>,
    /// Electricity price per stage [currency/kWh].
    pub price: Vec<S>,
    /// Supply-air setpoint per stage [°C].
    pub t_supply: Vec<S>,
}

impl<S: Scalar> ExogenousSeries<S> {
    pub fn validate(&self, model: &BuildingModel<S>) -> Result<(), ModelError> {
        let h = model.horizon();
        let bad = |r: String| Err(ModelError::InvalidExogenous(r));
        for (name, s) in [("t_out", &self.t_out), ("price", &self.price), ("t_supply", &self.t_supply)] {
            if s.len() != h {
                return bad(format!("{name} has length {}, horizon is {h}", s.len()));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} contains non-finite values"));
            }
        }
        if self.q_load.len() != model.n_zones() {
            return bad(format!(
                "q_load has {} rows, building has {} zones",
                self.q_load.len(),
                model.n_zones()
            ));
        }
        for (i, row) in self.q_load.iter().enumerate() {
            if row.len() != h {
                return bad(format!("q_load row {i} has length {}, horizon is {h}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("q_load row {i} contains non-finite values"));
            }
        }
        for (t, &tc) in self.t_supply.iter().enumerate() {
            for (i, z) in model.zones().iter().enumerate() {
                if tc >= z.t_min {
                    return bad(format!(
                        "supply setpoint {tc} at stage {t} is not below zone {i} comfort minimum {}",
                        z.t_min
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.price.len()
    }

    /// Sub-series covering stages `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self, ModelError> {
        let end = start + len;
        if len == 0 || end > self.price.len() {
            return Err(ModelError::InvalidExogenous(format!(
                "window {start}..{end} outside series of length {}",
                self.price.len()
            )));
        }
        Ok(ExogenousSeries {
            t_out: self.t_out[start..end].to_vec(),
            q_load: self.q_load.iter().map(|r| r[start..end].to_vec()).collect(),
            price: self.price[start..end].to_vec(),
            t_supply: self.t_supply[start..end].to_vec(),
        })
    }
}

/// Coefficients of the discrete-time zone dynamics
/// `T[t+1] = a_self T[t] + Σ_j a_neighbor T_j[t] + c_self X[t] + d_const[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDynamics<S = f64> {
    pub a_self: Vec<S>,
    /// Per zone `(j, A^ij)` sorted by `j`.
    pub a_neighbor: Vec<Vec<(usize, S)>>,
    pub c_self: Vec<S>,
    /// `[zone][stage]`.
    pub d_const: Vec<Vec<S>>,
}

pub fn build_discrete_dynamics<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
) -> Result<DiscreteDynamics<S>, ModelError> {
    exo.validate(model)?;
    let dt = model.dt();
    let cp = model.ahu().c_p;
    let n = model.n_zones();
    let mut a_self = Vec::with_capacity(n);
    let mut a_neighbor = Vec::with_capacity(n);
    let mut c_self = Vec::with_capacity(n);
    let mut d_const = Vec::with_capacity(n);
    for i in 0..n {
        let z = model.zone(i);
        let nb: Vec<(usize, S)> = model
            .neighbors(i)
            .iter()
            .map(|&(j, r)| (j, dt / (z.capacitance * r)))
            .collect();
        let outside = dt / (z.capacitance * z.r_out);
        let a = S::one() - (nb.iter().map(|&(_, a)| a).sum::<S>() + outside);
        if !(a > S::zero() && a < S::one()) {
            return Err(ModelError::Unstable {
                zone: i,
                a_self: a.as_f64(),
            });
        }
        a_self.push(a);
        a_neighbor.push(nb);
        c_self.push(-dt * cp / z.capacitance);
        d_const.push(
            exo.t_out
                .iter()
                .zip(&exo.q_load[i])
                .map(|(&to, &q)| dt * to / (z.capacitance * z.r_out) + dt * q / z.capacitance)
                .collect(),
        );
    }
    Ok(DiscreteDynamics {
        a_self,
        a_neighbor,
        c_self,
        d_const,
    })
}

impl<S: Scalar> DiscreteDynamics<S> {
    pub fn n_zones(&self) -> usize {
        self.a_self.len()
    }

    /// Zone `i`'s next temperature. Neighbor terms are summed in index order.
    #[inline]
    pub fn next_temp(&self, i: usize, temps: &[S], x_cool: S, t: usize) -> S {
        let coupled = self.a_neighbor[i]
            .iter()
            .fold(S::zero(), |acc, &(j, a)| acc + a * temps[j]);
        self.a_self[i] * temps[i] + coupled + self.c_self[i] * x_cool + self.d_const[i][t]
    }

    /// One stage of the zone dynamics for all zones.
    pub fn step(&self, temps: &[S], x_cool: &[S], t: usize) -> Vec<S> {
        assert_eq!(temps.len(), self.n_zones());
        assert_eq!(x_cool.len(), self.n_zones());
        (0..self.n_zones())
            .map(|i| self.next_temp(i, temps, x_cool[i], t))
            .collect()
    }
}

/// Cooling term `m (T - T^c)` as used everywhere the bilinear product is
/// evaluated exactly. Shared so simulation and recovery agree bitwise.
#[inline]
pub fn bilinear_cooling<S: Scalar>(flow: S, temp: S, t_supply: S) -> S {
    flow * (temp - t_supply)
}

/// Roll out the true bilinear dynamics from the model's initial state.
///
/// `flows` is indexed `[zone][stage]`; the returned temperatures have the
/// same shape with stage 0 equal to the initial condition.
pub fn simulate_schedule<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    flows: &[Vec<S>],
) -> Result<Vec<Vec<S>>, ModelError> {
    let dynamics = build_discrete_dynamics(model, exo)?;
    Ok(simulate_with(&dynamics, model, exo, flows))
}

/// [`simulate_schedule`] with precomputed dynamics.
pub fn simulate_with<S: Scalar>(
    dynamics: &DiscreteDynamics<S>,
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    flows: &[Vec<S>],
) -> Vec<Vec<S>> {
    let n = model.n_zones();
    let h = model.horizon();
    assert_eq!(flows.len(), n, "flows must have one row per zone");
    assert!(flows.iter().all(|r| r.len() == h), "flow rows must span the horizon");
    let mut temps = vec![vec![S::zero(); h]; n];
    let mut current = model.initial_temps();
    let mut x = vec![S::zero(); n];
    for t in 0..h {
        for i in 0..n {
            temps[i][t] = current[i];
            x[i] = bilinear_cooling(flows[i][t], current[i], exo.t_supply[t]);
        }
        if t + 1 < h {
            current = dynamics.step(&current, &x, t);
        }
    }
    temps
}
