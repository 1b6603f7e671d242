//! Turn a relaxed solution back into a schedule that obeys the bilinear
//! dynamics, and check a schedule against the comfort band and AHU cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adal::RelaxedSolution;
use crate::model::{bilinear_cooling, build_discrete_dynamics, simulate_with, BuildingModel, ExogenousSeries, ModelError};
use crate::power::{schedule_cost, CostBreakdown};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoverError {
    #[error("relaxed solution covers {got} stages of {zones} zones, model expects {expected} stages of {model_zones}")]
    Shape {
        got: usize,
        zones: usize,
        expected: usize,
        model_zones: usize,
    },
    #[error("stored trajectory disagrees with the simulator at zone {zone}, stage {stage}")]
    Inconsistent { zone: usize, stage: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortViolation<S = f64> {
    pub zone: usize,
    pub stage: usize,
    pub side: Side,
    /// Distance outside the band, °C.
    pub excess: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapViolation<S = f64> {
    pub stage: usize,
    /// Total flow above the AHU cap, kg/s.
    pub excess: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport<S = f64> {
    pub comfort: Vec<ComfortViolation<S>>,
    pub ahu_cap: Vec<CapViolation<S>>,
    pub max_comfort_excess: S,
}

impl<S: Scalar> ViolationReport<S> {
    pub fn is_feasible(&self) -> bool {
        self.comfort.is_empty() && self.ahu_cap.is_empty()
    }

    pub fn max_cap_excess(&self) -> S {
        self.ahu_cap.iter().fold(S::zero(), |acc, v| acc.max(v.excess))
    }
}

/// A schedule that satisfies the bilinear dynamics exactly. All per-zone
/// series are `[zone][stage]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<S = f64> {
    pub temps: Vec<Vec<S>>,
    pub flows: Vec<Vec<S>>,
    pub x_cool: Vec<Vec<S>>,
    pub cost: CostBreakdown<S>,
    pub violations: ViolationReport<S>,
}

impl<S: Scalar> Schedule<S> {
    pub fn n_zones(&self) -> usize {
        self.flows.len()
    }

    pub fn horizon(&self) -> usize {
        self.flows.first().map_or(0, Vec::len)
    }

    /// Flows of one stage across zones.
    pub fn stage_flows(&self, t: usize) -> Vec<S> {
        self.flows.iter().map(|r| r[t]).collect()
    }
}

/// Tolerances used when reporting violations. Anything within tolerance
/// counts as satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerance<S = f64> {
    pub comfort: S,
    pub cap: S,
}

impl<S: Scalar> Default for ValidationTolerance<S> {
    fn default() -> Self {
        ValidationTolerance {
            comfort: S::of(1e-6),
            cap: S::of(1e-9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverOptions<S = f64> {
    /// Below this temperature margin over the supply air the zone gets its
    /// minimum flow instead of the ratio.
    pub guard: S,
    /// Scale flows down at stages whose total exceeds the AHU cap.
    pub repair_cap: bool,
    pub tolerance: ValidationTolerance<S>,
}

impl<S: Scalar> Default for RecoverOptions<S> {
    fn default() -> Self {
        RecoverOptions {
            guard: S::of(0.5),
            repair_cap: false,
            tolerance: ValidationTolerance::default(),
        }
    }
}

/// Flow that reproduces the relaxed cooling `x_target` at the realized
/// temperature, clamped to the zone's flow bounds.
#[inline]
pub fn recovered_flow<S: Scalar>(x_target: S, temp: S, t_supply: S, m_min: S, m_max: S, guard: S) -> S {
    let margin = temp - t_supply;
    if margin < guard {
        return m_min;
    }
    (x_target / margin).min(m_max).max(m_min)
}

/// Shrink the part of each flow above its minimum so the stage total meets
/// the cap. With zero minimum flows this is plain proportional scaling.
fn repair_stage<S: Scalar>(flows: &mut [S], m_min: &[S], cap: S) {
    let total: S = flows.iter().copied().sum();
    if total <= cap {
        return;
    }
    let floor: S = m_min.iter().copied().sum();
    let above = total - floor;
    let factor = if above > S::zero() {
        ((cap - floor) / above).max(S::zero())
    } else {
        S::zero()
    };
    for (m, &lo) in flows.iter_mut().zip(m_min) {
        *m = lo + (*m - lo) * factor;
    }
}

/// Forward pass with the default options.
pub fn recover_schedule<S: Scalar>(
    relaxed: &RelaxedSolution<S>,
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
) -> Result<Schedule<S>, RecoverError> {
    recover_with(relaxed, model, exo, RecoverOptions::default())
}

pub fn recover_with<S: Scalar>(
    relaxed: &RelaxedSolution<S>,
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    options: RecoverOptions<S>,
) -> Result<Schedule<S>, RecoverError> {
    let x_target: Vec<Vec<S>> = relaxed.agents.iter().map(|a| a.x_cool.clone()).collect();
    recover_from_cooling(&x_target, model, exo, options)
}

/// Core of the recovery: only the relaxed cooling `[zone][stage]` is used.
///
/// At each stage every zone picks the flow that would deliver its relaxed
/// cooling at the realized temperature, then all zones advance together on
/// the exact dynamics.
pub fn recover_from_cooling<S: Scalar>(
    x_target: &[Vec<S>],
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    options: RecoverOptions<S>,
) -> Result<Schedule<S>, RecoverError> {
    let n = model.n_zones();
    let h = model.horizon();
    let got = x_target.first().map_or(0, Vec::len);
    if x_target.len() != n || x_target.iter().any(|r| r.len() != h) {
        return Err(RecoverError::Shape {
            got,
            zones: x_target.len(),
            expected: h,
            model_zones: n,
        });
    }
    let dynamics = build_discrete_dynamics(model, exo)?;
    let zones = model.zones();
    let m_min: Vec<S> = zones.iter().map(|z| z.m_min).collect();
    let cap = model.ahu().m_total_max;

    let mut temps = vec![vec![S::zero(); h]; n];
    let mut flows = vec![vec![S::zero(); h]; n];
    let mut x_cool = vec![vec![S::zero(); h]; n];
    let mut current = model.initial_temps();
    let mut m = vec![S::zero(); n];
    let mut x = vec![S::zero(); n];
    for t in 0..h {
        let tc = exo.t_supply[t];
        for i in 0..n {
            m[i] = recovered_flow(x_target[i][t], current[i], tc, zones[i].m_min, zones[i].m_max, options.guard);
        }
        if options.repair_cap {
            repair_stage(&mut m, &m_min, cap);
        }
        for i in 0..n {
            debug_assert!(m[i] >= zones[i].m_min && m[i] <= zones[i].m_max);
            x[i] = bilinear_cooling(m[i], current[i], tc);
            temps[i][t] = current[i];
            flows[i][t] = m[i];
            x_cool[i][t] = x[i];
        }
        if t + 1 < h {
            current = dynamics.step(&current, &x, t);
        }
    }
    Ok(finish_schedule(model, exo, temps, flows, x_cool, options.tolerance))
}

fn finish_schedule<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    temps: Vec<Vec<S>>,
    flows: Vec<Vec<S>>,
    x_cool: Vec<Vec<S>>,
    tol: ValidationTolerance<S>,
) -> Schedule<S> {
    let cost = schedule_cost(model, exo, &flows, &temps);
    let violations = check_constraints(model, &temps, &flows, tol);
    Schedule {
        temps,
        flows,
        x_cool,
        cost,
        violations,
    }
}

/// Simulate `flows` (`[zone][stage]`) from the model's initial state and
/// package the result as a schedule.
pub fn schedule_from_flows<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    flows: Vec<Vec<S>>,
) -> Result<Schedule<S>, RecoverError> {
    let dynamics = build_discrete_dynamics(model, exo)?;
    let n = model.n_zones();
    let h = model.horizon();
    if flows.len() != n || flows.iter().any(|r| r.len() != h) {
        return Err(RecoverError::Shape {
            got: flows.first().map_or(0, Vec::len),
            zones: flows.len(),
            expected: h,
            model_zones: n,
        });
    }
    let temps = simulate_with(&dynamics, model, exo, &flows);
    let x_cool = (0..n)
        .map(|i| (0..h).map(|t| bilinear_cooling(flows[i][t], temps[i][t], exo.t_supply[t])).collect())
        .collect();
    Ok(finish_schedule(model, exo, temps, flows, x_cool, ValidationTolerance::default()))
}

/// Comfort band at stages `t >= 1` (stage 0 is the given initial state) and
/// the AHU cap at every stage.
pub fn check_constraints<S: Scalar>(
    model: &BuildingModel<S>,
    temps: &[Vec<S>],
    flows: &[Vec<S>],
    tol: ValidationTolerance<S>,
) -> ViolationReport<S> {
    let h = model.horizon();
    let mut comfort = Vec::new();
    let mut max_excess = S::zero();
    for (i, z) in model.zones().iter().enumerate() {
        for t in 1..h {
            let temp = temps[i][t];
            let (side, excess) = if temp > z.t_max {
                (Side::Above, temp - z.t_max)
            } else if temp < z.t_min {
                (Side::Below, z.t_min - temp)
            } else {
                continue;
            };
            if excess > tol.comfort {
                max_excess = max_excess.max(excess);
                comfort.push(ComfortViolation {
                    zone: i,
                    stage: t,
                    side,
                    excess,
                });
            }
        }
    }
    let cap = model.ahu().m_total_max;
    let ahu_cap = (0..h)
        .filter_map(|t| {
            let total: S = flows.iter().map(|r| r[t]).sum();
            let excess = total - cap;
            (excess > tol.cap).then_some(CapViolation { stage: t, excess })
        })
        .collect();
    ViolationReport {
        comfort,
        ahu_cap,
        max_comfort_excess: max_excess,
    }
}

/// Re-simulate the schedule's flows, demand bitwise agreement with its
/// stored temperatures and cooling, and report constraint violations.
pub fn validate_schedule<S: Scalar>(
    schedule: &Schedule<S>,
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
) -> Result<ViolationReport<S>, RecoverError> {
    validate_with(schedule, model, exo, ValidationTolerance::default())
}

pub fn validate_with<S: Scalar>(
    schedule: &Schedule<S>,
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    tol: ValidationTolerance<S>,
) -> Result<ViolationReport<S>, RecoverError> {
    let n = model.n_zones();
    let h = model.horizon();
    let shape_ok = |v: &[Vec<S>]| v.len() == n && v.iter().all(|r| r.len() == h);
    if !(shape_ok(&schedule.flows) && shape_ok(&schedule.temps) && shape_ok(&schedule.x_cool)) {
        return Err(RecoverError::Shape {
            got: schedule.horizon(),
            zones: schedule.n_zones(),
            expected: h,
            model_zones: n,
        });
    }
    let dynamics = build_discrete_dynamics(model, exo)?;
    let sim = simulate_with(&dynamics, model, exo, &schedule.flows);
    for i in 0..n {
        for t in 0..h {
            let x = bilinear_cooling(schedule.flows[i][t], sim[i][t], exo.t_supply[t]);
            if same(sim[i][t], schedule.temps[i][t]) && same(x, schedule.x_cool[i][t]) {
                continue;
            }
            return Err(RecoverError::Inconsistent { zone: i, stage: t });
        }
    }
    Ok(check_constraints(model, &schedule.temps, &schedule.flows, tol))
}

/// Exact equality that also treats NaN as equal to NaN.
fn same<S: Scalar>(a: S, b: S) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adal::Multipliers;
    use crate::model::{simulate_schedule, AhuParams, Edge, ZoneParams};
    use crate::relax::AgentTrajectory;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zone(t_init: f64) -> ZoneParams {
        ZoneParams {
            capacitance: 1375.0,
            r_out: 50.0,
            t_min: 24.0,
            t_max: 26.0,
            m_min: 0.0,
            m_max: 0.5,
            t_init,
        }
    }

    fn toy(h: usize, cap: f64) -> (BuildingModel, ExogenousSeries) {
        let m = BuildingModel::new(
            vec![zone(26.5), zone(27.5), zone(26.0)],
            vec![
                Edge {
                    a: 0,
                    b: 1,
                    resistance: 14.0,
                },
                Edge {
                    a: 1,
                    b: 2,
                    resistance: 14.0,
                },
            ],
            AhuParams {
                d_r: 0.8,
                eta: 1.0,
                kappa_f: 0.08,
                m_total_max: cap,
                c_p: 1.012,
            },
            1800.0,
            h,
        )
        .unwrap();
        let e = ExogenousSeries {
            t_out: (0..h).map(|t| 30.0 + 0.3 * t as f64).collect(),
            q_load: vec![vec![0.5; h], vec![0.8; h], vec![0.2; h]],
            price: (0..h).map(|t| if t < h / 2 { 0.12 } else { 0.26 }).collect(),
            t_supply: vec![15.0; h],
        };
        (m, e)
    }

    fn relaxed_from(x_target: &[Vec<f64>], temps: &[Vec<f64>], flows: &[Vec<f64>]) -> RelaxedSolution {
        let h = x_target[0].len();
        let n = x_target.len();
        RelaxedSolution {
            agents: (0..n)
                .map(|i| AgentTrajectory {
                    temps: temps[i].clone(),
                    flows: flows[i].clone(),
                    x_cool: x_target[i].clone(),
                })
                .collect(),
            y_total: vec![0.0; h],
            s1: vec![0.0; h],
            s2: vec![0.0; h],
            multipliers: Multipliers::zeros(n, h),
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
            residual_history: vec![],
            trace: vec![],
            inexact_subproblems: 0,
        }
    }

    #[test]
    fn identity_on_recursively_feasible_input() {
        let (m, e) = toy(6, 1.5);
        let flows = vec![
            vec![0.3, 0.2, 0.1, 0.4, 0.0, 0.25],
            vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.0],
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        ];
        let temps = simulate_schedule(&m, &e, &flows).unwrap();
        let x: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..6).map(|t| flows[i][t] * (temps[i][t] - 15.0)).collect())
            .collect();
        let s = recover_schedule(&relaxed_from(&x, &temps, &flows), &m, &e).unwrap();
        for i in 0..3 {
            for t in 0..6 {
                assert_relative_eq!(s.flows[i][t], flows[i][t], epsilon = 1e-12);
                assert_relative_eq!(s.temps[i][t], temps[i][t], epsilon = 1e-10);
                assert_relative_eq!(s.x_cool[i][t], x[i][t], epsilon = 1e-10);
            }
        }
        assert!(validate_schedule(&s, &m, &e).is_ok());
    }

    #[test]
    fn large_cooling_clamps_to_max_flow() {
        let (m, e) = toy(3, 1.5);
        let x = vec![vec![100.0; 3]; 3];
        let s = recover_from_cooling(&x, &m, &e, RecoverOptions::default()).unwrap();
        assert!(s.flows.iter().flatten().all(|&f| f == 0.5));
    }

    #[test]
    fn guard_forces_minimum_flow() {
        let mut z = zone(15.25);
        z.m_min = 0.05;
        let m = BuildingModel::new(
            vec![z],
            vec![],
            AhuParams {
                d_r: 0.8,
                eta: 1.0,
                kappa_f: 0.08,
                m_total_max: 1.0,
                c_p: 1.012,
            },
            1800.0,
            2,
        )
        .unwrap();
        let e = ExogenousSeries {
            t_out: vec![30.0; 2],
            q_load: vec![vec![0.5; 2]],
            price: vec![0.2; 2],
            t_supply: vec![15.0; 2],
        };
        let s = recover_from_cooling(&[vec![1.0, 1.0]], &m, &e, RecoverOptions::default()).unwrap();
        assert_eq!(s.flows[0][0], 0.05);
        assert_eq!(recovered_flow(1.0, 15.25, 15.0, 0.05, 0.5, 0.5), 0.05);
        assert_eq!(recovered_flow(1.0, 25.0, 15.0, 0.0, 0.5, 0.5), 0.1);
    }

    #[test]
    fn cap_violation_is_reported_with_its_excess() {
        let (m, e) = toy(3, 1.0);
        let flows = vec![vec![0.3, 0.5, 0.1], vec![0.3, 0.4, 0.1], vec![0.3, 0.2, 0.1]];
        let s = schedule_from_flows(&m, &e, flows).unwrap();
        let r = validate_schedule(&s, &m, &e).unwrap();
        assert_eq!(r.ahu_cap.len(), 1);
        assert_eq!(r.ahu_cap[0].stage, 1);
        assert_relative_eq!(r.ahu_cap[0].excess, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn repair_removes_cap_violations() {
        let (m, e) = toy(5, 0.6);
        let x = vec![vec![100.0; 5]; 3];
        let plain = recover_from_cooling(&x, &m, &e, RecoverOptions::default()).unwrap();
        assert_eq!(plain.violations.ahu_cap.len(), 5);
        let opts = RecoverOptions {
            repair_cap: true,
            ..RecoverOptions::default()
        };
        let fixed = recover_from_cooling(&x, &m, &e, opts).unwrap();
        assert!(fixed.violations.ahu_cap.is_empty());
        for t in 0..5 {
            assert_relative_eq!(fixed.stage_flows(t).iter().sum::<f64>(), 0.6, epsilon = 1e-12);
        }
        assert!(validate_schedule(&fixed, &m, &e).is_ok());
    }

    #[test]
    fn comfort_violations_skip_the_initial_stage() {
        let (m, e) = toy(4, 1.5);
        let s = schedule_from_flows(&m, &e, vec![vec![0.0; 4]; 3]).unwrap();
        assert!(s.violations.comfort.iter().all(|v| v.stage >= 1 && v.side == Side::Above));
        assert!(!s.violations.comfort.is_empty());
        let worst = s.violations.comfort.iter().map(|v| v.excess).fold(0.0, f64::max);
        assert_eq!(worst, s.violations.max_comfort_excess);
    }

    #[test]
    fn tampered_schedule_is_inconsistent() {
        let (m, e) = toy(4, 1.5);
        let mut s = schedule_from_flows(&m, &e, vec![vec![0.2; 4]; 3]).unwrap();
        s.temps[1][2] += 1e-12;
        assert_eq!(
            validate_schedule(&s, &m, &e),
            Err(RecoverError::Inconsistent { zone: 1, stage: 2 })
        );
    }

    #[test]
    fn wrong_horizon_is_rejected() {
        let (m, e) = toy(4, 1.5);
        let err = recover_from_cooling(&vec![vec![1.0; 3]; 3], &m, &e, RecoverOptions::default());
        assert!(matches!(err, Err(RecoverError::Shape { .. })));
    }

    proptest! {
        #[test]
        fn recovery_is_exact_and_within_bounds(
            x in proptest::collection::vec(-2.0f64..8.0, 18),
            repair in any::<bool>(),
        ) {
            let (m, e) = toy(6, 0.9);
            let xt: Vec<Vec<f64>> = x.chunks(6).map(|c| c.to_vec()).collect();
            let opts = RecoverOptions { repair_cap: repair, ..RecoverOptions::default() };
            let s = recover_from_cooling(&xt, &m, &e, opts).unwrap();
            prop_assert!(s.flows.iter().flatten().all(|&f| (0.0..=0.5).contains(&f)));
            for i in 0..3 {
                for t in 0..6 {
                    prop_assert_eq!(s.x_cool[i][t], s.flows[i][t] * (s.temps[i][t] - 15.0));
                }
            }
            let sim = simulate_schedule(&m, &e, &s.flows).unwrap();
            prop_assert_eq!(&sim, &s.temps);
            prop_assert!(validate_schedule(&s, &m, &e).is_ok());
            if repair {
                prop_assert!(s.violations.ahu_cap.is_empty());
            }
            let again = recover_from_cooling(&xt, &m, &e, opts).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
