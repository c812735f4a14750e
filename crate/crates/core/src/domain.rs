//! Bounded convex domains with closed-form projections.
//!
//! Three shapes are supported: intervals, axis-aligned boxes and Euclidean
//! balls. Each one has an exact orthogonal projection, so the penalty field
//! `kappa * (x - project(x))` can be evaluated without an inner solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width of the band around the boundary that counts as "on" it.
pub const BOUNDARY_TOL_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Membership summary returned by [`Domain::queries`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Queries {
    pub dist_to_set: f64,
    pub in_interior: bool,
    pub on_boundary: bool,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidDomain(format!("interval needs a < b, got [{a}, {b}]")));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidDomain("box bounds must be nonempty and of equal length".into()));
                }
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if !(l.is_finite() && h.is_finite() && l < h) {
                        return Err(Error::InvalidDomain(format!("box edge {i} has zero or negative length")));
                    }
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidDomain("ball center must be a finite nonempty vector".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn tol_boundary(&self) -> f64 {
        BOUNDARY_TOL_REL * self.diameter()
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => (vec![*a], vec![*b]),
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Writes the nearest point of the closed domain into `out`.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Domain::Interval { a, b } => out[0] = x[0].clamp(*a, *b),
            Domain::Box { lo, hi } => {
                for i in 0..lo.len() {
                    out[i] = x[i].clamp(lo[i], hi[i]);
                }
            }
            Domain::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    out[..x.len()].copy_from_slice(x);
                } else {
                    // shrink by an ulp at a time until rounding leaves the point inside,
                    // so that projected points are fixed points of the projection
                    let mut s = radius / r;
                    loop {
                        for i in 0..center.len() {
                            out[i] = center[i] + s * (x[i] - center[i]);
                        }
                        if dist(&out[..center.len()], center) <= *radius {
                            break;
                        }
                        s *= 1.0 - f64::EPSILON;
                    }
                }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.project_into(x, &mut out);
        out
    }

    /// Euclidean distance to the closed domain (zero inside).
    pub fn dist(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (a - x[0]).max(x[0] - b).max(0.0),
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(x)
                .map(|((l, h), xi)| {
                    let e = (l - xi).max(xi - h).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist(x) <= 0.0
    }

    /// Unsigned distance to the boundary, valid on both sides of it.
    pub fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        let outside = self.dist(x);
        if outside > 0.0 {
            return outside;
        }
        match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(x)
                .map(|((l, h), xi)| (xi - l).min(h - xi))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => radius - dist(x, center),
        }
    }

    pub fn queries(&self, x: &[f64]) -> Queries {
        let tol = self.tol_boundary();
        let dist_to_set = self.dist(x);
        let on_boundary = self.dist_to_boundary(x) <= tol;
        Queries {
            dist_to_set,
            in_interior: dist_to_set == 0.0 && !on_boundary,
            on_boundary,
        }
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.dist_to_boundary(x) <= self.tol_boundary()
    }

    /// Outward unit normal at a boundary point.
    ///
    /// At box corners the normal is the normalized sum of the normals of
    /// every active face.
    pub fn outward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tol = self.tol_boundary();
        let d = self.dist_to_boundary(x);
        if d > tol {
            return Err(Error::NotOnBoundary { distance: d, tolerance: tol });
        }
        Ok(self.normal_unchecked(x))
    }

    /// Normal of the nearest boundary point, for any `x`.
    ///
    /// For boxes the faces within the boundary tolerance of `project(x)` are
    /// combined; for interior box points the closest face is used.
    pub fn normal_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let tol = self.tol_boundary();
        match self {
            Domain::Interval { a, b } => {
                if (x[0] - a).abs() <= (b - x[0]).abs() {
                    vec![-1.0]
                } else {
                    vec![1.0]
                }
            }
            Domain::Box { lo, hi } => {
                let p = self.project(x);
                let mut n = vec![0.0; lo.len()];
                let mut any = false;
                for i in 0..lo.len() {
                    if p[i] - lo[i] <= tol {
                        n[i] -= 1.0;
                        any = true;
                    }
                    if hi[i] - p[i] <= tol {
                        n[i] += 1.0;
                        any = true;
                    }
                }
                if !any {
                    let (mut best, mut axis, mut sign) = (f64::INFINITY, 0, 1.0);
                    for i in 0..lo.len() {
                        if p[i] - lo[i] < best {
                            best = p[i] - lo[i];
                            axis = i;
                            sign = -1.0;
                        }
                        if hi[i] - p[i] < best {
                            best = hi[i] - p[i];
                            axis = i;
                            sign = 1.0;
                        }
                    }
                    n[axis] = sign;
                }
                normalize(&mut n);
                n
            }
            Domain::Ball { center, .. } => {
                let mut n: Vec<f64> = x.iter().zip(center).map(|(xi, c)| xi - c).collect();
                if norm(&n) == 0.0 {
                    n[0] = 1.0;
                }
                normalize(&mut n);
                n
            }
        }
    }

    /// Outward normal of the face crossed when leaving along axis `axis` in
    /// direction `side` (+1 or -1) from `x`.
    ///
    /// Boxes and intervals return the face normal itself; balls return the
    /// normal at the projection of the neighbouring point.
    pub fn face_normal(&self, x: &[f64], axis: usize, side: f64, step: f64) -> Vec<f64> {
        match self {
            Domain::Interval { .. } | Domain::Box { .. } => {
                let mut n = vec![0.0; self.dim()];
                n[axis] = side.signum();
                n
            }
            Domain::Ball { .. } => {
                let mut y = x.to_vec();
                y[axis] += side * step;
                self.normal_unchecked(&self.project(&y))
            }
        }
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> Domain {
        Domain::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn projection_examples() {
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.project(&[2.0, 0.0]), vec![1.0, 0.0]);
        let iv = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(iv.project(&[0.5]), vec![0.5]);
        assert_eq!(unit_square().project(&[2.0, -1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn normal_examples() {
        let iv = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(iv.outward_normal(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(iv.outward_normal(&[0.0]).unwrap(), vec![-1.0]);
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.outward_normal(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);

        let sq = unit_square();
        let n = sq.outward_normal(&[1.0, 1.0]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((n[0] - s).abs() < 1e-15 && (n[1] - s).abs() < 1e-15);
        // pushing off the corner along the normal projects straight back
        for eps in [1e-6, 1e-3, 0.1] {
            let p = sq.project(&[1.0 + eps * n[0], 1.0 + eps * n[1]]);
            assert_eq!(p, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn normal_rejects_interior_points() {
        let iv = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(iv.outward_normal(&[0.5]), Err(Error::NotOnBoundary { .. })));
        assert!(iv.outward_normal(&[1.0 + 1e-12]).is_ok());
        assert!(iv.outward_normal(&[1.0 + 1e-6]).is_err());
    }

    #[test]
    fn query_examples() {
        let iv = Domain::interval(0.0, 1.0).unwrap();
        let q = iv.queries(&[1.5]);
        assert_eq!(q.dist_to_set, 0.5);
        assert!(!q.in_interior);

        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let q = ball.queries(&[0.0, 0.0]);
        assert_eq!(q.dist_to_set, 0.0);
        assert!(q.in_interior && !q.on_boundary);

        let q = unit_square().queries(&[0.5, 1.0]);
        assert_eq!(q.dist_to_set, 0.0);
        assert!(q.on_boundary && !q.in_interior);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(vec![0.0], 0.0).is_err());
        assert!(Domain::new_box(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(Domain::new_box(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn toml_round_trip_shape() {
        let d: Domain = toml::from_str("kind = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0\n").unwrap();
        assert_eq!(d, Domain::ball(vec![0.0, 0.0], 1.0).unwrap());
    }

    fn domains() -> impl Strategy<Value = Domain> {
        prop_oneof![
            Just(Domain::interval(-0.5, 1.5).unwrap()),
            Just(unit_square()),
            Just(Domain::new_box(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap()),
            Just(Domain::ball(vec![0.2, -0.1], 0.7).unwrap()),
            Just(Domain::ball(vec![0.0, 0.0, 0.0], 2.0).unwrap()),
        ]
    }

    fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-4.0..4.0f64, dim)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn projection_is_idempotent_and_realizes_distance(
            (d, x) in domains().prop_flat_map(|d| { let n = d.dim(); (Just(d), point(n)) })
        ) {
            let p = d.project(&x);
            let pp = d.project(&p);
            prop_assert!(dist(&p, &pp) <= 1e-15);
            prop_assert!((dist(&p, &x) - d.dist(&x)).abs() <= 1e-12);
            prop_assert!(d.dist(&p) == 0.0);
        }

        #[test]
        fn projection_is_nonexpansive(
            (d, x, y) in domains().prop_flat_map(|d| { let n = d.dim(); (Just(d), point(n), point(n)) })
        ) {
            let (px, py) = (d.project(&x), d.project(&y));
            prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
        }

        #[test]
        fn normal_is_a_supporting_hyperplane(
            (d, x, z) in domains().prop_flat_map(|d| { let n = d.dim(); (Just(d), point(n), point(n)) })
        ) {
            // push x outside then project to land on the boundary
            let mut far = x.clone();
            far.iter_mut().for_each(|v| *v *= 10.0);
            let b = d.project(&far);
            if d.on_boundary(&b) {
                let n = d.outward_normal(&b).unwrap();
                prop_assert!((norm(&n) - 1.0).abs() < 1e-12);
                let zin = d.project(&z);
                let diff: Vec<f64> = zin.iter().zip(&b).map(|(a, c)| a - c).collect();
                prop_assert!(dot(&diff, &n) <= 1e-10);
            }
        }
    }
}
