//! Exhaustive search over flow grids for tiny instances.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Diagnostics, Method, ReferenceSolution};
use crate::model::{bilinear_cooling, build_discrete_dynamics, BuildingModel, DiscreteDynamics, ExogenousSeries};
use crate::power::{cooling_power, fan_power};
use crate::recover::schedule_from_flows;
use crate::scalar::Scalar;

/// Size limits for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteForceLimits {
    pub max_zones: usize,
    pub max_horizon: usize,
    pub max_points: usize,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits {
            max_zones: 2,
            max_horizon: 3,
            max_points: 21,
        }
    }
}

/// `lo, lo + step, ...` up to `hi`, with `hi` always included.
pub fn flow_grid<S: Scalar>(lo: S, hi: S, step: S) -> Vec<S> {
    if hi <= lo {
        return vec![lo];
    }
    let span = ((hi - lo) / step).as_f64();
    let k = (span + 1e-9).floor() as usize;
    let mut g: Vec<S> = (0..=k).map(|j| lo + step * S::of(j as f64)).collect();
    let last = *g.last().expect("grid has a point");
    if (hi - last).abs() <= S::of(1e-9) * (S::one() + hi.abs()) {
        *g.last_mut().expect("grid has a point") = hi;
    } else if last < hi {
        g.push(hi);
    }
    g
}

struct Search<'a, S: Scalar> {
    model: &'a BuildingModel<S>,
    exo: &'a ExogenousSeries<S>,
    dynamics: DiscreteDynamics<S>,
    grids: Vec<Vec<S>>,
    combos: Vec<Vec<usize>>,
    hours: S,
}

/// Cheapest feasible completion found so far: cost and grid indices
/// `[stage][zone]`.
type Best<S> = Option<(S, Vec<Vec<usize>>)>;

impl<S: Scalar> Search<'_, S> {
    fn flows_of(&self, combo: &[usize]) -> Vec<S> {
        combo.iter().enumerate().map(|(i, &k)| self.grids[i][k]).collect()
    }

    fn stage_cost(&self, m: &[S], temps: &[S], t: usize) -> S {
        let ahu = self.model.ahu();
        let p = cooling_power(m, temps, self.exo.t_out[t], self.exo.t_supply[t], ahu) + fan_power(m, ahu.kappa_f);
        self.exo.price[t] * p * self.hours
    }

    fn comfortable(&self, temps: &[S]) -> bool {
        self.model
            .zones()
            .iter()
            .zip(temps)
            .all(|(z, &x)| x >= z.t_min && x <= z.t_max)
    }

    fn admissible(&self, m: &[S]) -> bool {
        m.iter().copied().sum::<S>() <= self.model.ahu().m_total_max
    }

    fn descend(&self, t: usize, temps: &[S], cost: S, path: &mut Vec<Vec<usize>>, best: &mut Best<S>, count: &mut u64) {
        if t == self.model.horizon() {
            *count += 1;
            let better = match best {
                None => true,
                Some((c, p)) => cost < *c || (cost == *c && index_less(path, p)),
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        for combo in &self.combos {
            let m = self.flows_of(combo);
            if !self.admissible(&m) {
                continue;
            }
            let c = cost + self.stage_cost(&m, temps, t);
            path.push(combo.clone());
            if t + 1 < self.model.horizon() {
                let x: Vec<S> = m
                    .iter()
                    .zip(temps)
                    .map(|(&f, &tz)| bilinear_cooling(f, tz, self.exo.t_supply[t]))
                    .collect();
                let next = self.dynamics.step(temps, &x, t);
                if self.comfortable(&next) {
                    self.descend(t + 1, &next, c, path, best, count);
                }
            } else {
                self.descend(t + 1, temps, c, path, best, count);
            }
            path.pop();
        }
    }
}

/// Lexicographic order of the flow vector laid out `[zone][stage]`. Grids are
/// increasing, so comparing indices compares flows.
fn index_less(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    let zones = a.first().map_or(0, Vec::len);
    for i in 0..zones {
        for t in 0..a.len() {
            match a[t][i].cmp(&b[t][i]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}

fn cartesian(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..s).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// Cheapest schedule whose flows lie on a grid of spacing `resolution`
/// between each zone's bounds, found by enumeration with comfort pruning.
/// Ties go to the lexicographically smallest flow vector.
pub fn brute_force_oracle<S: Scalar>(
    model: &BuildingModel<S>,
    exo: &ExogenousSeries<S>,
    resolution: S,
    limits: BruteForceLimits,
) -> Result<ReferenceSolution<S>, BaselineError> {
    let clock = Instant::now();
    if !(resolution > S::zero()) {
        return Err(BaselineError::InvalidOptions("grid resolution must be positive".into()));
    }
    let (n, h) = (model.n_zones(), model.horizon());
    if n > limits.max_zones || h > limits.max_horizon {
        return Err(BaselineError::TooLarge(format!(
            "{n} zones over {h} stages, oracle limit is {} zones over {} stages",
            limits.max_zones, limits.max_horizon
        )));
    }
    let grids: Vec<Vec<S>> = model
        .zones()
        .iter()
        .map(|z| flow_grid(z.m_min, z.m_max, resolution))
        .collect();
    if let Some(g) = grids.iter().find(|g| g.len() > limits.max_points) {
        return Err(BaselineError::TooLarge(format!(
            "{} grid points per flow, limit {}",
            g.len(),
            limits.max_points
        )));
    }
    let sizes: Vec<usize> = grids.iter().map(Vec::len).collect();
    let search = Search {
        model,
        exo,
        dynamics: build_discrete_dynamics(model, exo)?,
        combos: cartesian(&sizes),
        grids,
        hours: model.dt_hours(),
    };
    let init = model.initial_temps();
    let partial: Vec<(Best<S>, u64)> = search
        .combos
        .par_iter()
        .map(|first| {
            let mut best = None;
            let mut count = 0;
            let m = search.flows_of(first);
            if !search.admissible(&m) {
                return (best, count);
            }
            let c = search.stage_cost(&m, &init, 0);
            let mut path = vec![first.clone()];
            if h > 1 {
                let x: Vec<S> = m
                    .iter()
                    .zip(&init)
                    .map(|(&f, &tz)| bilinear_cooling(f, tz, exo.t_supply[0]))
                    .collect();
                let next = search.dynamics.step(&init, &x, 0);
                if search.comfortable(&next) {
                    search.descend(1, &next, c, &mut path, &mut best, &mut count);
                }
            } else {
                search.descend(1, &init, c, &mut path, &mut best, &mut count);
            }
            (best, count)
        })
        .collect();
    let mut best: Best<S> = None;
    let mut evaluated = 0;
    for (cand, count) in partial {
        evaluated += count;
        if let Some((c, p)) = cand {
            let better = match &best {
                None => true,
                Some((bc, bp)) => c < *bc || (c == *bc && index_less(&p, bp)),
            };
            if better {
                best = Some((c, p));
            }
        }
    }
    let Some((_, path)) = best else {
        return Err(BaselineError::InfeasibleAtResolution {
            resolution: resolution.as_f64(),
        });
    };
    let flows: Vec<Vec<S>> = (0..n)
        .map(|i| (0..h).map(|t| search.grids[i][path[t][i]]).collect())
        .collect();
    let schedule = schedule_from_flows(model, exo, flows)?;
    Ok(ReferenceSolution {
        method: Method::BruteForce,
        objective: schedule.cost.total,
        schedule: Some(schedule),
        relaxed: None,
        diagnostics: Diagnostics {
            evaluated,
            wall_clock_s: clock.elapsed().as_secs_f64(),
            starts_tried: 1,
            starts_feasible: 1,
            ..Diagnostics::default()
        },
    })
}
