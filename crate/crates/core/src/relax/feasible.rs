//! Local feasible set of one zone agent: flow and comfort bounds plus the
//! four envelope rows at every stage.

use super::mccormick::{mccormick_constraints, AffineRow, McCormickBox};
use super::simplex::{Feature, StageRegion};
use super::RelaxError;
use crate::model::ZoneParams;
use crate::scalar::Scalar;

/// Variables per stage in a stacked agent vector: `(T, m, X)`.
pub const STAGE_VARS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct StageConstraints<S> {
    pub envelope: McCormickBox<S>,
    pub rows: [AffineRow<S>; 4],
    pub t_bounds: (S, S),
    pub m_bounds: (S, S),
    pub region: StageRegion<S>,
}

impl<S: Scalar> StageConstraints<S> {
    fn new(envelope: McCormickBox<S>) -> Result<Self, RelaxError> {
        let rows = mccormick_constraints(&envelope)?;
        let c = envelope.corners();
        let region = if envelope.is_pinned() {
            StageRegion::Segment([c[0], c[1]])
        } else {
            StageRegion::Tetrahedron(c)
        };
        Ok(StageConstraints {
            envelope,
            rows,
            t_bounds: (envelope.t_lo, envelope.t_hi),
            m_bounds: (envelope.m_lo, envelope.m_hi),
            region,
        })
    }

    pub fn contains(&self, p: [S; 3], tol: S) -> bool {
        p[0] >= self.t_bounds.0 - tol
            && p[0] <= self.t_bounds.1 + tol
            && p[1] >= self.m_bounds.0 - tol
            && p[1] <= self.m_bounds.1 + tol
            && self.rows.iter().all(|r| r.satisfied(p, tol))
    }
}

/// Options shaping the per-stage boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSetOptions<S> {
    /// Fix the stage-0 temperature to a known state.
    pub pinned_initial: Option<S>,
    /// Override the comfort band at the last stage.
    pub terminal_band: Option<(S, S)>,
}

impl<S> Default for LocalSetOptions<S> {
    fn default() -> Self {
        LocalSetOptions {
            pinned_initial: None,
            terminal_band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeasibleSet<S> {
    pub stages: Vec<StageConstraints<S>>,
}

pub fn local_feasible_set<S: Scalar>(
    zone: &ZoneParams<S>,
    t_supply: &[S],
    options: LocalSetOptions<S>,
) -> Result<LocalFeasibleSet<S>, RelaxError> {
    let h = t_supply.len();
    let mut stages = Vec::with_capacity(h);
    for (t, &tc) in t_supply.iter().enumerate() {
        let envelope = match (t, options.pinned_initial) {
            (0, Some(t0)) => McCormickBox::pinned(zone.m_min, zone.m_max, t0, tc)?,
            _ => {
                let (lo, hi) = match options.terminal_band {
                    Some(band) if t + 1 == h => band,
                    _ => (zone.t_min, zone.t_max),
                };
                McCormickBox::new(zone.m_min, zone.m_max, lo, hi, tc)?
            }
        };
        stages.push(StageConstraints::new(envelope)?);
    }
    Ok(LocalFeasibleSet { stages })
}

impl<S: Scalar> LocalFeasibleSet<S> {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn n_vars(&self) -> usize {
        STAGE_VARS * self.stages.len()
    }

    pub fn n_envelope_rows(&self) -> usize {
        4 * self.stages.len()
    }

    /// Lower and upper bound rows on `T` and `m`.
    pub fn n_bound_rows(&self) -> usize {
        4 * self.stages.len()
    }

    pub fn contains(&self, x: &[S], tol: S) -> bool {
        assert_eq!(x.len(), self.n_vars());
        self.stages
            .iter()
            .enumerate()
            .all(|(t, s)| s.contains([x[3 * t], x[3 * t + 1], x[3 * t + 2]], tol))
    }

    /// Project a stacked vector in place, recording each stage's feature.
    pub fn project_into(&self, x: &mut [S], features: &mut [Feature]) {
        for (t, s) in self.stages.iter().enumerate() {
            let (q, f) = s.region.project([x[3 * t], x[3 * t + 1], x[3 * t + 2]]);
            x[3 * t] = q[0];
            x[3 * t + 1] = q[1];
            x[3 * t + 2] = q[2];
            features[t] = f;
        }
    }

    pub fn project(&self, x: &mut [S]) {
        let mut f = vec![0; self.stages.len()];
        self.project_into(x, &mut f);
    }

    /// A simple feasible point: lowest flow, given temperature, lower envelope.
    pub fn lower_point(&self, temp_of_stage: impl Fn(usize) -> S) -> Vec<S> {
        let mut x = Vec::with_capacity(self.n_vars());
        for (t, s) in self.stages.iter().enumerate() {
            let temp = temp_of_stage(t).max(s.t_bounds.0).min(s.t_bounds.1);
            let m = s.m_bounds.0;
            x.extend_from_slice(&[temp, m, s.envelope.lower_envelope(m, temp)]);
        }
        x
    }
}
