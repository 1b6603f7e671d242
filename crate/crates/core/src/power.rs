//! AHU power and energy cost.
//!
//! Cooling power always carries the `eta` factor. Prices are per kWh, so
//! stage energy is power times the step length in hours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BuildingModel, ExogenousSeries};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("return-air temperature undefined at zero total flow")]
    ZeroTotalFlow,
}

/// Flow-weighted mean of zone temperatures.
pub fn return_air_temp<S: Scalar>(flows: &[S], temps: &[S]) -> Result<S, PowerError> {
    let total: S = flows.iter().copied().sum();
    if total <= S::zero() {
        return Err(PowerError::ZeroTotalFlow);
    }
    let weighted = flows
        .iter()
        .zip(temps)
        .fold(S::zero(), |acc, (&m, &t)| acc + m * t);
    Ok(weighted / total)
}

pub fn mixed_air_temp<S: Scalar>(t_out: S, t_return: S, d_r: S) -> S {
    (S::one() - d_r) * t_out + d_r * t_return
}

/// Coil power in the expanded form that stays defined at zero flow:
/// fresh-air share plus return-air share.
pub fn cooling_power<S: Scalar>(
    flows: &[S],
    temps: &[S],
    t_out: S,
    t_supply: S,
    ahu: &crate::model::AhuParams<S>,
) -> S {
    let total: S = flows.iter().copied().sum();
    let recirculated = flows
        .iter()
        .zip(temps)
        .fold(S::zero(), |acc, (&m, &t)| acc + m * (t - t_supply));
    ahu.c_p * ahu.eta * (S::one() - ahu.d_r) * total * (t_out - t_supply)
        + ahu.c_p * ahu.eta * ahu.d_r * recirculated
}

/// Coil power through the mixed-air temperature. Requires positive flow.
pub fn cooling_power_mixed<S: Scalar>(
    flows: &[S],
    temps: &[S],
    t_out: S,
    t_supply: S,
    ahu: &crate::model::AhuParams<S>,
) -> Result<S, PowerError> {
    let total: S = flows.iter().copied().sum();
    let t_mixed = mixed_air_temp(t_out, return_air_temp(flows, temps)?, ahu.d_r);
    Ok(ahu.c_p * ahu.eta * total * (t_mixed - t_supply))
}

pub fn fan_power<S: Scalar>(flows: &[S], kappa_f: S) -> S {
    let total: S = flows.iter().copied().sum();
    kappa_f * total * total * total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagePower<S = f64> {
    pub stage: usize,
    pub cooling_kw: S,
    pub fan_kw: S,
    pub price: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<S = f64> {
    pub cooling_cost: S,
    pub fan_cost: S,
    pub total: S,
    pub per_stage: Vec<StagePower<S>>,
}

/// Energy cost of a schedule. `flows` and `temps` are `[zone][stage]`.
pub fn schedule_cost<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    flows: &[Vec<S>],
    temps: &[Vec<S>],
) -> CostBreakdown<S> {
    let h = model.horizon();
    let n = model.n_zones();
    assert_eq!(flows.len(), n);
    assert_eq!(temps.len(), n);
    let hours = model.dt_hours();
    let ahu = model.ahu();
    let mut per_stage = Vec::with_capacity(h);
    let mut cooling_cost = S::zero();
    let mut fan_cost = S::zero();
    let mut m = vec![S::zero(); n];
    let mut tz = vec![S::zero(); n];
    for t in 0..h {
        for i in 0..n {
            m[i] = flows[i][t];
            tz[i] = temps[i][t];
        }
        let cooling_kw = cooling_power(&m, &tz, exo.t_out[t], exo.t_supply[t], ahu);
        let fan_kw = fan_power(&m, ahu.kappa_f);
        cooling_cost += exo.price[t] * cooling_kw * hours;
        fan_cost += exo.price[t] * fan_kw * hours;
        per_stage.push(StagePower {
            stage: t,
            cooling_kw,
            fan_kw,
            price: exo.price[t],
        });
    }
    CostBreakdown {
        cooling_cost,
        fan_cost,
        total: cooling_cost + fan_cost,
        per_stage,
    }
}

/// Per-stage coefficients that make the cost separable: one unit of
/// recirculated cooling `m (T - T^c)` costs `x_weight`, the total flow `Y`
/// costs `y_linear * Y + y_cubic * Y^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<S = f64> {
    pub x_weight: Vec<S>,
    pub y_linear: Vec<S>,
    pub y_cubic: Vec<S>,
}

impl<S: Scalar> CostWeights<S> {
    pub fn new(model: &BuildingModel<S>, exo: &ExogenousSeries<S>) -> Self {
        let a = model.ahu();
        let hours = model.dt_hours();
        let h = model.horizon();
        CostWeights {
            x_weight: (0..h).map(|t| exo.price[t] * hours * a.c_p * a.eta * a.d_r).collect(),
            y_linear: (0..h)
                .map(|t| {
                    exo.price[t] * hours * a.c_p * a.eta * (S::one() - a.d_r) * (exo.t_out[t] - exo.t_supply[t])
                })
                .collect(),
            y_cubic: (0..h).map(|t| exo.price[t] * hours * a.kappa_f).collect(),
        }
    }
}

/// Objective of the relaxed problem: linear in the cooling variables `x_cool`
/// (`[zone][stage]`) and in the total flow `y_total`, plus the cubic fan term.
pub fn relaxed_cost<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    x_cool: &[Vec<S>],
    y_total: &[S],
) -> S {
    let hours = model.dt_hours();
    let a = model.ahu();
    let mut total = S::zero();
    for t in 0..model.horizon() {
        let x_sum: S = x_cool.iter().map(|row| row[t]).sum();
        let y = y_total[t];
        let stage = a.c_p * a.eta * (S::one() - a.d_r) * (exo.t_out[t] - exo.t_supply[t]) * y
            + a.kappa_f * y * y * y
            + a.c_p * a.eta * a.d_r * x_sum;
        total += exo.price[t] * stage * hours;
    }
    total
}
