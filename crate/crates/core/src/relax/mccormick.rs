//! Convex/concave envelopes of the bilinear cooling term `m (T - T_ref)`
//! over a box in `(T, m)`.

use serde::{Deserialize, Serialize};

use super::RelaxError;
use crate::scalar::Scalar;

/// Box over which the bilinear term is relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCormickBox<S = f64> {
    pub m_lo: S,
    pub m_hi: S,
    pub t_lo: S,
    pub t_hi: S,
    /// Supply-air setpoint subtracted from the temperature.
    pub t_ref: S,
}

impl<S: Scalar> McCormickBox<S> {
    pub fn new(m_lo: S, m_hi: S, t_lo: S, t_hi: S, t_ref: S) -> Result<Self, RelaxError> {
        if !(m_lo < m_hi) {
            return Err(RelaxError::DegenerateBox(format!("flow range [{m_lo}, {m_hi}] is empty")));
        }
        if !(t_lo < t_hi) {
            return Err(RelaxError::DegenerateBox(format!(
                "temperature range [{t_lo}, {t_hi}] is empty"
            )));
        }
        if !(t_ref < t_lo) {
            return Err(RelaxError::DegenerateBox(format!(
                "reference {t_ref} is not below the temperature range"
            )));
        }
        Ok(McCormickBox {
            m_lo,
            m_hi,
            t_lo,
            t_hi,
            t_ref,
        })
    }

    /// Box whose temperature is fixed, e.g. a known initial state. The
    /// envelopes then collapse to the exact product.
    pub fn pinned(m_lo: S, m_hi: S, temp: S, t_ref: S) -> Result<Self, RelaxError> {
        if !(m_lo < m_hi) {
            return Err(RelaxError::DegenerateBox(format!("flow range [{m_lo}, {m_hi}] is empty")));
        }
        if !(t_ref < temp) {
            return Err(RelaxError::DegenerateBox(format!(
                "pinned temperature {temp} is not above the reference {t_ref}"
            )));
        }
        Ok(McCormickBox {
            m_lo,
            m_hi,
            t_lo: temp,
            t_hi: temp,
            t_ref,
        })
    }

    pub fn is_pinned(&self) -> bool {
        self.t_lo == self.t_hi
    }

    /// Largest of the two under-estimators.
    pub fn lower_envelope(&self, m: S, t: S) -> S {
        let (ml, mh, tl, th, tc) = (self.m_lo, self.m_hi, self.t_lo, self.t_hi, self.t_ref);
        let a = ml * (t - tc) + m * (tl - tc) - ml * (tl - tc);
        let b = mh * (t - tc) + m * (th - tc) - mh * (th - tc);
        a.max(b)
    }

    /// Smallest of the two over-estimators.
    pub fn upper_envelope(&self, m: S, t: S) -> S {
        let (ml, mh, tl, th, tc) = (self.m_lo, self.m_hi, self.t_lo, self.t_hi, self.t_ref);
        let a = m * (th - tc) + ml * (t - tc) - ml * (th - tc);
        let b = mh * (t - tc) + m * (tl - tc) - mh * (tl - tc);
        a.min(b)
    }

    /// The four points `(T, m, m (T - T_ref))` at the box corners. Their convex
    /// hull is exactly the region cut out by the four envelope rows.
    pub fn corners(&self) -> [[S; 3]; 4] {
        let p = |t: S, m: S| [t, m, m * (t - self.t_ref)];
        [
            p(self.t_lo, self.m_lo),
            p(self.t_lo, self.m_hi),
            p(self.t_hi, self.m_lo),
            p(self.t_hi, self.m_hi),
        ]
    }
}

/// `coef · (T, m, X) <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRow<S = f64> {
    pub coef: [S; 3],
    pub rhs: S,
}

impl<S: Scalar> AffineRow<S> {
    pub fn slack(&self, p: [S; 3]) -> S {
        self.rhs - (self.coef[0] * p[0] + self.coef[1] * p[1] + self.coef[2] * p[2])
    }

    pub fn satisfied(&self, p: [S; 3], tol: S) -> bool {
        self.slack(p) >= -tol
    }
}

/// The two lower-envelope rows followed by the two upper-envelope rows, each
/// written as `coef · (T, m, X) <= rhs`.
pub fn mccormick_constraints<S: Scalar>(b: &McCormickBox<S>) -> Result<[AffineRow<S>; 4], RelaxError> {
    if !(b.m_lo < b.m_hi) || b.t_lo > b.t_hi || !(b.t_ref < b.t_lo) {
        return Err(RelaxError::DegenerateBox("invalid McCormick box".into()));
    }
    let (ml, mh, tl, th, tc) = (b.m_lo, b.m_hi, b.t_lo, b.t_hi, b.t_ref);
    let one = S::one();
    Ok([
        // X >= ml (T - tc) + m (tl - tc) - ml (tl - tc)
        AffineRow {
            coef: [ml, tl - tc, -one],
            rhs: ml * tl,
        },
        // X >= mh (T - tc) + m (th - tc) - mh (th - tc)
        AffineRow {
            coef: [mh, th - tc, -one],
            rhs: mh * th,
        },
        // X <= m (th - tc) + ml (T - tc) - ml (th - tc)
        AffineRow {
            coef: [-ml, -(th - tc), one],
            rhs: -ml * th,
        },
        // X <= mh (T - tc) + m (tl - tc) - mh (tl - tc)
        AffineRow {
            coef: [-mh, -(tl - tc), one],
            rhs: -mh * tl,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn paper_box() -> McCormickBox {
        McCormickBox::new(0.0, 0.5, 24.0, 26.0, 15.0).unwrap()
    }

    #[test]
    fn corners_are_tight() {
        let b = paper_box();
        let rows = mccormick_constraints(&b).unwrap();
        let p = [26.0, 0.5, 5.5];
        for r in &rows {
            assert!(r.satisfied(p, 1e-12));
        }
        assert_abs_diff_eq!(b.lower_envelope(0.5, 26.0), 5.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.upper_envelope(0.5, 26.0), 5.5, epsilon = 1e-12);
    }

    #[test]
    fn midpoint_lies_strictly_inside() {
        let b = paper_box();
        let lo = b.lower_envelope(0.25, 25.0);
        let hi = b.upper_envelope(0.25, 25.0);
        assert_abs_diff_eq!(lo, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 2.75, epsilon = 1e-12);
        assert!(lo < 2.5 && 2.5 < hi);
    }

    #[test]
    fn row_form_matches_envelopes() {
        let b = McCormickBox::new(0.05, 0.5, 24.0, 26.0, 15.0).unwrap();
        let rows = mccormick_constraints(&b).unwrap();
        let (m, t) = (0.31, 24.7);
        let lo = b.lower_envelope(m, t);
        let hi = b.upper_envelope(m, t);
        for r in &rows {
            assert!(r.satisfied([t, m, lo], 1e-12));
            assert!(r.satisfied([t, m, hi], 1e-12));
        }
        assert!(rows.iter().any(|r| !r.satisfied([t, m, lo - 1e-6], 0.0)));
        assert!(rows.iter().any(|r| !r.satisfied([t, m, hi + 1e-6], 0.0)));
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(McCormickBox::new(0.0, 0.5, 25.0, 25.0, 15.0).is_err());
        assert!(McCormickBox::new(0.5, 0.5, 24.0, 26.0, 15.0).is_err());
        assert!(McCormickBox::new(0.0, 0.5, 24.0, 26.0, 24.0).is_err());
    }

    #[test]
    fn pinned_box_is_exact() {
        let b = McCormickBox::pinned(0.0, 0.5, 28.0, 15.0).unwrap();
        for m in [0.0, 0.1, 0.37, 0.5] {
            assert_abs_diff_eq!(b.lower_envelope(m, 28.0), m * 13.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.upper_envelope(m, 28.0), m * 13.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn envelope_contains_product(
            m_lo in 0.0f64..0.2, dm in 0.05f64..0.5,
            t_lo in 18.0f64..25.0, dt in 0.5f64..4.0,
            u in 0.0f64..=1.0, v in 0.0f64..=1.0,
        ) {
            let b = McCormickBox::new(m_lo, m_lo + dm, t_lo, t_lo + dt, 15.0).unwrap();
            let m = m_lo + u * dm;
            let t = t_lo + v * dt;
            let x = m * (t - 15.0);
            prop_assert!(b.lower_envelope(m, t) <= x + 1e-12);
            prop_assert!(x <= b.upper_envelope(m, t) + 1e-12);
            // on an edge one of the envelopes is exact
            for (me, te) in [(b.m_lo, t), (b.m_hi, t), (m, b.t_lo), (m, b.t_hi)] {
                let xe = me * (te - 15.0);
                let tight = (b.lower_envelope(me, te) - xe).abs() < 1e-9
                    || (b.upper_envelope(me, te) - xe).abs() < 1e-9;
                prop_assert!(tight);
            }
        }
    }
}
