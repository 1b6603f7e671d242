//! Euclidean projection onto the per-stage feasible region of a zone.
//!
//! Each stage's region is the convex hull of the four McCormick corners (a
//! tetrahedron in `(T, m, X)`), or of two points when the stage temperature
//! is pinned. Closest-point queries follow the usual region tests on faces,
//! edges and vertices.

use crate::scalar::Scalar;

pub type Point<S> = [S; 3];

#[inline]
fn sub<S: Scalar>(a: Point<S>, b: Point<S>) -> Point<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn add_scaled<S: Scalar>(a: Point<S>, d: Point<S>, s: S) -> Point<S> {
    [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]]
}

#[inline]
pub(crate) fn dot3<S: Scalar>(a: Point<S>, b: Point<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross<S: Scalar>(a: Point<S>, b: Point<S>) -> Point<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Bit set of hull vertices spanning the face that holds a projected point.
pub type Feature = u8;

/// Convex region of one stage, stored by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub enum StageRegion<S> {
    Tetrahedron([Point<S>; 4]),
    Segment([Point<S>; 2]),
}

impl<S: Scalar> StageRegion<S> {
    pub fn vertices(&self) -> &[Point<S>] {
        match self {
            StageRegion::Tetrahedron(v) => v,
            StageRegion::Segment(v) => v,
        }
    }

    /// Closest point of the region and the feature it lies on.
    pub fn project(&self, p: Point<S>) -> (Point<S>, Feature) {
        match self {
            StageRegion::Segment([a, b]) => {
                let ab = sub(*b, *a);
                let len2 = dot3(ab, ab);
                let t = if len2 > S::zero() {
                    dot3(sub(p, *a), ab) / len2
                } else {
                    S::zero()
                };
                if t <= S::zero() {
                    (*a, 0b01)
                } else if t >= S::one() {
                    (*b, 0b10)
                } else {
                    (add_scaled(*a, ab, t), 0b11)
                }
            }
            StageRegion::Tetrahedron(v) => closest_on_tetrahedron(p, v),
        }
    }

    /// Orthonormal basis of the directions along `feature`.
    pub fn feature_basis(&self, feature: Feature) -> Vec<Point<S>> {
        let verts = self.vertices();
        let chosen: Vec<Point<S>> = (0..verts.len())
            .filter(|k| feature & (1 << k) != 0)
            .map(|k| verts[k])
            .collect();
        let mut basis: Vec<Point<S>> = Vec::with_capacity(3);
        if chosen.len() == verts.len() && verts.len() == 4 {
            let one = S::one();
            let zero = S::zero();
            return vec![[one, zero, zero], [zero, one, zero], [zero, zero, one]];
        }
        for w in chosen.iter().skip(1) {
            let mut d = sub(*w, chosen[0]);
            for b in &basis {
                let c = dot3(d, *b);
                d = add_scaled(d, *b, -c);
            }
            let n = dot3(d, d).sqrt();
            if n > S::of(1e-12) {
                basis.push([d[0] / n, d[1] / n, d[2] / n]);
            }
        }
        basis
    }
}

fn outside_of_plane<S: Scalar>(p: Point<S>, a: Point<S>, b: Point<S>, c: Point<S>, d: Point<S>) -> bool {
    let n = cross(sub(b, a), sub(c, a));
    let sp = dot3(sub(p, a), n);
    let sd = dot3(sub(d, a), n);
    sp * sd < S::zero()
}

/// Closest point on triangle `v[ia] v[ib] v[ic]` with its feature bits.
fn closest_on_triangle<S: Scalar>(p: Point<S>, v: &[Point<S>; 4], ia: usize, ib: usize, ic: usize) -> (Point<S>, Feature) {
    let (a, b, c) = (v[ia], v[ib], v[ic]);
    let (fa, fb, fc) = (1u8 << ia, 1u8 << ib, 1u8 << ic);
    let zero = S::zero();
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot3(ab, ap);
    let d2 = dot3(ac, ap);
    if d1 <= zero && d2 <= zero {
        return (a, fa);
    }
    let bp = sub(p, b);
    let d3 = dot3(ab, bp);
    let d4 = dot3(ac, bp);
    if d3 >= zero && d4 <= d3 {
        return (b, fb);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let t = d1 / (d1 - d3);
        return (add_scaled(a, ab, t), fa | fb);
    }
    let cp = sub(p, c);
    let d5 = dot3(ab, cp);
    let d6 = dot3(ac, cp);
    if d6 >= zero && d5 <= d6 {
        return (c, fc);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let t = d2 / (d2 - d6);
        return (add_scaled(a, ac, t), fa | fc);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (add_scaled(b, sub(c, b), t), fb | fc);
    }
    let denom = S::one() / (va + vb + vc);
    let sv = vb * denom;
    let sw = vc * denom;
    (add_scaled(add_scaled(a, ab, sv), ac, sw), fa | fb | fc)
}

fn closest_on_tetrahedron<S: Scalar>(p: Point<S>, v: &[Point<S>; 4]) -> (Point<S>, Feature) {
    // (face vertices, opposite vertex)
    const FACES: [([usize; 3], usize); 4] = [([0, 1, 2], 3), ([0, 2, 3], 1), ([0, 3, 1], 2), ([1, 3, 2], 0)];
    let mut best: Option<(Point<S>, Feature, S)> = None;
    for (f, opp) in FACES {
        if outside_of_plane(p, v[f[0]], v[f[1]], v[f[2]], v[opp]) {
            let (q, feat) = closest_on_triangle(p, v, f[0], f[1], f[2]);
            let d = sub(q, p);
            let d2 = dot3(d, d);
            if best.map_or(true, |(_, _, b)| d2 < b) {
                best = Some((q, feat, d2));
            }
        }
    }
    match best {
        Some((q, feat, _)) => (q, feat),
        None => (p, 0b1111),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::mccormick::{mccormick_constraints, McCormickBox};
    use proptest::prelude::*;

    fn region() -> (McCormickBox, StageRegion<f64>) {
        let b = McCormickBox::new(0.0, 0.5, 24.0, 26.0, 15.0).unwrap();
        (b, StageRegion::Tetrahedron(b.corners()))
    }

    fn inside(b: &McCormickBox, p: Point<f64>, tol: f64) -> bool {
        mccormick_constraints(b).unwrap().iter().all(|r| r.satisfied(p, tol))
            && p[0] >= b.t_lo - tol
            && p[0] <= b.t_hi + tol
            && p[1] >= b.m_lo - tol
            && p[1] <= b.m_hi + tol
    }

    #[test]
    fn interior_point_is_fixed() {
        let (_, r) = region();
        let p = [25.0, 0.25, 2.5];
        assert_eq!(r.project(p), (p, 0b1111));
    }

    #[test]
    fn far_point_snaps_to_vertex() {
        let (_, r) = region();
        let (q, f) = r.project([40.0, 5.0, 100.0]);
        assert_eq!(f.count_ones(), 1);
        assert!(r.vertices().contains(&q));
    }

    #[test]
    fn segment_projection() {
        let s: StageRegion<f64> = StageRegion::Segment([[28.0, 0.0, 0.0], [28.0, 0.5, 6.5]]);
        let (q, f) = s.project([28.0, 0.25, 3.25 + 1.0]);
        assert_eq!(f, 0b11);
        assert!((q[2] - q[1] * 13.0).abs() < 1e-12);
        assert_eq!(s.project([20.0, -1.0, -5.0]).1, 0b01);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_optimal(
            t in 20.0f64..30.0, m in -0.3f64..0.8, x in -2.0f64..8.0,
            u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0,
        ) {
            let (b, r) = region();
            let p = [t, m, x];
            let (q, f) = r.project(p);
            prop_assert!(inside(&b, q, 1e-9));
            // any other hull point is no closer
            let c = b.corners();
            let s = u + v + w + 1.0;
            let mut z = [0.0; 3];
            for k in 0..3 {
                z[k] = (c[0][k] * u + c[1][k] * v + c[2][k] * w + c[3][k]) / s;
            }
            let dq = sub(q, p);
            let dz = sub(z, p);
            prop_assert!(dot3(dq, dq) <= dot3(dz, dz) + 1e-9);
            // variational inequality: (p - q) . (z - q) <= 0
            prop_assert!(dot3(sub(p, q), sub(z, q)) <= 1e-8);
            prop_assert!(f != 0);
        }
    }
}
