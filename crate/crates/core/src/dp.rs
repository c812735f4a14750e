//! Dynamic programming for the constrained and penalized cost-to-come.
//!
//! The recursion is written in pull form: for every target node `x_j` and
//! lattice control `w`, the sources `x'` whose discrete step lands on `x_j`
//! are located, and
//!
//! ```text
//! V_{k+1}(x_j) = min_{w, x'} V_k(x') + dt * l(t_k, x', w)
//! ```
//!
//! with `V_k(x')` read by multilinear interpolation. For the projected step
//! `x' -> P(x' + dt v)`, interior targets have the single source
//! `x' = x_j - dt v(x')`; boundary targets additionally collect every `x'`
//! pushed onto `x_j` through the normal cone, sampled as
//! `P(x_j + lambda n - dt v)` for `lambda` in `[0, dt (v.n)]`. Penalized
//! sources come from integrating the penalized flow backward.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::domain::Domain;
use crate::dynamics::penalty_substeps;
use crate::error::{Error, Result};
use crate::fields::VectorFieldSpec;
use crate::grid::{is_reachable, FieldLabel, StateGrid, ValueField, SENTINEL};
use crate::paths::TimeGrid;
use crate::rng;

type Pt = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DpMode {
    Constrained,
    Penalized { kappa: f64 },
}

/// Odd per-axis lattice on `[-omega_max, omega_max]^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLattice {
    dim: usize,
    per_axis: usize,
    omega_max: f64,
    points: Vec<f64>,
}

impl ControlLattice {
    pub const DEFAULT_PER_AXIS: usize = 21;

    pub fn new(dim: usize, per_axis: usize, omega_max: f64) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::param("controls", "control dimension must be 1 or 2"));
        }
        if per_axis % 2 == 0 {
            return Err(Error::param("controls", format!("per-axis count must be odd so 0 is included, got {per_axis}")));
        }
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(Error::param("omega_max", format!("must be positive, got {omega_max}")));
        }
        let axis: Vec<f64> = (0..per_axis)
            .map(|j| {
                if per_axis == 1 {
                    0.0
                } else {
                    -omega_max + 2.0 * omega_max * j as f64 / (per_axis - 1) as f64
                }
            })
            .collect();
        let mut points = Vec::with_capacity(per_axis.pow(dim as u32) * dim);
        if dim == 1 {
            points.extend_from_slice(&axis);
        } else {
            for a in &axis {
                for b in &axis {
                    points.push(*a);
                    points.push(*b);
                }
            }
        }
        Ok(ControlLattice {
            dim,
            per_axis,
            omega_max,
            points,
        })
    }

    /// `4 (diam(G) / t + max |b|)`.
    pub fn default_omega_max(vf: &VectorFieldSpec, domain: &Domain, t: f64) -> f64 {
        4.0 * (domain.diameter() / t + vf.max_drift(domain, 41))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    /// Store the sentinel instead of failing when a node of `closure(G)`
    /// has no source.
    pub allow_unreachable: bool,
    /// Collect normal-cone sources at boundary targets. Turning this off
    /// gives the hard state-constraint recursion over unprojected steps.
    pub sticky_sources: bool,
    /// Polish the best lattice control by golden-section search over the
    /// neighbouring lattice cells, one axis at a time.
    pub refine_controls: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            allow_unreachable: false,
            sticky_sources: true,
            refine_controls: true,
        }
    }
}

/// Everything the recursion needs.
#[derive(Debug, Clone)]
pub struct DpProblem {
    pub vf: VectorFieldSpec,
    pub grid: StateGrid,
    pub cost: CostSpec,
    pub mode: DpMode,
    pub controls: ControlLattice,
    pub times: TimeGrid,
    pub options: DpOptions,
}

impl DpProblem {
    pub fn new(
        vf: VectorFieldSpec,
        grid: StateGrid,
        cost: CostSpec,
        mode: DpMode,
        controls: ControlLattice,
        times: TimeGrid,
    ) -> Result<Self> {
        let p = DpProblem {
            vf,
            grid,
            cost,
            mode,
            controls,
            times,
            options: DpOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_options(mut self, options: DpOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.vf.validate()?;
        let n = self.grid.dim();
        if self.vf.state_dim() != n {
            return Err(Error::Dimension {
                what: "state grid",
                expected: self.vf.state_dim(),
                got: n,
            });
        }
        if self.controls.dim() != self.vf.noise_dim() {
            return Err(Error::Dimension {
                what: "control lattice",
                expected: self.vf.noise_dim(),
                got: self.controls.dim(),
            });
        }
        if self.cost.obs.dim != self.vf.obs_dim() {
            return Err(Error::Dimension {
                what: "observation path",
                expected: self.vf.obs_dim(),
                got: self.cost.obs.dim,
            });
        }
        self.cost.psi.validate(Some(n))?;
        self.cost.obs.check_step(self.times.dt)?;
        if self.times.t_end() > self.cost.obs.grid.t_end() + 1e-9 * self.times.dt {
            return Err(Error::GridMismatch("horizon exceeds the observation path".into()));
        }
        if let DpMode::Penalized { kappa } = self.mode {
            if !(kappa.is_finite() && kappa > 0.0) {
                return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
            }
        }
        Ok(())
    }

    /// Grid the recursion runs on: the state grid itself, or a padded copy
    /// wide enough for the penalized excursions out of `G`.
    pub fn work_grid(&self) -> StateGrid {
        match self.mode {
            DpMode::Constrained => self.grid.clone(),
            DpMode::Penalized { kappa } => {
                let d = self.grid.domain();
                let speed = self.vf.max_drift(d, 41) + self.controls.omega_max() * sigma_norm(&self.vf);
                let margin = (speed / kappa).min(d.diameter());
                self.grid.extended(margin, PAD_RATIO)
            }
        }
    }

    fn label(&self) -> FieldLabel {
        match self.mode {
            DpMode::Constrained => FieldLabel::Constrained,
            DpMode::Penalized { kappa } => FieldLabel::Penalized { kappa },
        }
    }

    fn sources(&self, t: f64, x: &[f64], w: &[f64], normals: &[Pt], out: &mut Vec<Pt>) {
        out.clear();
        let d = self.grid.domain();
        let n = x.len();
        let dt = self.times.dt;
        let mut v = [0.0; 2];
        let mut xp = [0.0; 2];
        // fixed point x' = x - dt v(x') with one refinement
        self.vf.velocity_into(t, x, w, &mut v[..n]);
        for i in 0..n {
            xp[i] = x[i] - dt * v[i];
        }
        let mut v1 = [0.0; 2];
        self.vf.velocity_into(t, &xp[..n], w, &mut v1[..n]);
        for i in 0..n {
            xp[i] = x[i] - dt * v1[i];
        }
        let tol = d.tol_boundary();
        match self.mode {
            DpMode::Constrained => {
                if d.dist(&xp[..n]) <= tol {
                    out.push(xp);
                }
                for nrm in normals {
                    let vn: f64 = (0..n).map(|i| v[i] * nrm[i]).sum();
                    if vn <= 0.0 {
                        continue;
                    }
                    for q in 1..=4 {
                        let lam = 0.25 * q as f64 * dt * vn;
                        let mut y = [0.0; 2];
                        for i in 0..n {
                            y[i] = x[i] + lam * nrm[i] - dt * v[i];
                        }
                        let mut s = [0.0; 2];
                        d.project_into(&y[..n], &mut s[..n]);
                        out.push(s);
                    }
                }
            }
            DpMode::Penalized { kappa } => {
                if d.dist(x) <= tol && d.dist(&xp[..n]) <= tol {
                    out.push(xp);
                    return;
                }
                let m = penalty_substeps(dt, kappa);
                let h = dt / m as f64;
                let mut y = [0.0; 2];
                y[..n].copy_from_slice(x);
                let mut p = [0.0; 2];
                for _ in 0..m {
                    self.vf.velocity_into(t, &y[..n], w, &mut v[..n]);
                    d.project_into(&y[..n], &mut p[..n]);
                    for i in 0..n {
                        y[i] -= h * (v[i] - kappa * (y[i] - p[i]));
                    }
                    if !y[..n].iter().all(|c| c.is_finite()) {
                        return;
                    }
                }
                out.push(y);
            }
        }
    }

    fn normals_at(&self, x: &[f64]) -> Vec<Pt> {
        if !self.options.sticky_sources || self.mode != DpMode::Constrained {
            return Vec::new();
        }
        active_normals(self.grid.domain(), x)
    }

    fn pull(&self, grid: &StateGrid, prev: &[f64], t: f64, j: usize) -> f64 {
        if !grid.active(j) {
            return f64::NAN;
        }
        let n = grid.dim();
        let x = grid.node(j);
        let normals = self.normals_at(&x);
        let mut buf = Vec::with_capacity(8);
        let mut scratch = vec![0.0; self.vf.obs_dim()];
        let dt = self.times.dt;
        self.minimize_controls(|w| {
            let mut best = SENTINEL;
            self.sources(t, &x, w, &normals, &mut buf);
            for s in &buf {
                if let Some(v0) = grid.interpolate(prev, &s[..n], |i| is_reachable(prev[i])) {
                    best = best.min(v0 + dt * self.cost.running(&self.vf, t, &s[..n], w, &mut scratch));
                }
            }
            best
        })
    }

    /// Minimum of `f` over the lattice, then polished by golden-section
    /// search within one lattice cell of the best point along each axis.
    fn minimize_controls(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let lat = &self.controls;
        let mut best = SENTINEL;
        let mut arg = None;
        for c in 0..lat.len() {
            let v = f(lat.point(c));
            if v < best {
                best = v;
                arg = Some(c);
            }
        }
        let Some(c) = arg else { return best };
        if !self.options.refine_controls || lat.per_axis() < 3 {
            return best;
        }
        let r = lat.dim();
        let om = lat.omega_max();
        let cell = 2.0 * om / (lat.per_axis() - 1) as f64;
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut w = [0.0; 2];
        w[..r].copy_from_slice(lat.point(c));
        for a in 0..r {
            let mut probe = w;
            let mut eval = |z: f64| {
                probe[a] = z;
                f(&probe[..r])
            };
            let (mut lo, mut hi) = ((w[a] - cell).max(-om), (w[a] + cell).min(om));
            let mut x1 = hi - inv_phi * (hi - lo);
            let mut x2 = lo + inv_phi * (hi - lo);
            let mut f1 = eval(x1);
            let mut f2 = eval(x2);
            for _ in 0..GOLDEN_ITERS {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = eval(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = eval(x2);
                }
            }
            let (z, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if v < best {
                best = v;
                w[a] = z;
            }
        }
        best
    }
}

/// Growth ratio of the pad spacing away from the wall.
const PAD_RATIO: f64 = 1.3;

/// Golden-section iterations per control axis.
const GOLDEN_ITERS: usize = 36;

fn sigma_norm(vf: &VectorFieldSpec) -> f64 {
    vf.sigma_matrix().to_nalgebra().norm()
}

/// Outward normals of the faces active at `x`: one per face for boxes
/// (plus their normalized sum at corners), the radial normal for balls.
fn active_normals(d: &Domain, x: &[f64]) -> Vec<Pt> {
    let tol = d.tol_boundary();
    match d {
        Domain::Interval { a, b } => {
            if (x[0] - a).abs() <= tol {
                vec![[-1.0, 0.0]]
            } else if (x[0] - b).abs() <= tol {
                vec![[1.0, 0.0]]
            } else {
                Vec::new()
            }
        }
        Domain::Box { lo, hi } => {
            let mut out = Vec::new();
            let mut sum: Pt = [0.0; 2];
            for i in 0..lo.len() {
                let s = if (x[i] - lo[i]).abs() <= tol {
                    -1.0
                } else if (x[i] - hi[i]).abs() <= tol {
                    1.0
                } else {
                    continue;
                };
                let mut nrm = [0.0; 2];
                nrm[i] = s;
                sum[i] = s;
                out.push(nrm);
            }
            if out.len() > 1 {
                let r = (sum[0] * sum[0] + sum[1] * sum[1]).sqrt();
                out.push([sum[0] / r, sum[1] / r]);
            }
            out
        }
        Domain::Ball { .. } => {
            if d.on_boundary(x) {
                let nrm = d.normal_unchecked(x);
                let mut p = [0.0; 2];
                p[..nrm.len()].copy_from_slice(&nrm);
                vec![p]
            } else {
                Vec::new()
            }
        }
    }
}

/// Cost-to-come table `V[k][i]` for `k = 0..=K`.
///
/// Penalized runs live on a padded grid; nodes outside `closure(G)` that no
/// source reaches hold the sentinel without raising an error.
pub fn dp_solve(p: &DpProblem) -> Result<ValueField> {
    p.validate()?;
    let grid = p.work_grid();
    let n = grid.len();
    let steps = p.times.steps;
    let mut values = Vec::with_capacity((steps + 1) * n);
    for i in 0..n {
        // trajectories start in closure(G), in both modes
        values.push(if grid.inside(i) {
            p.cost.psi.eval(&grid.node(i))
        } else if grid.active(i) {
            SENTINEL
        } else {
            f64::NAN
        });
    }
    for k in 0..steps {
        let t = p.times.t(k);
        let next: Vec<f64> = {
            let prev = &values[k * n..(k + 1) * n];
            (0..n).into_par_iter().map(|j| p.pull(&grid, prev, t, j)).collect()
        };
        for (j, v) in next.iter().enumerate() {
            if v.is_nan() && grid.active(j) {
                return Err(Error::NonFinite { step: k + 1 });
            }
            if grid.inside(j) && !is_reachable(*v) && !p.options.allow_unreachable {
                return Err(Error::Unreachable { step: k + 1, node: j });
            }
        }
        values.extend(next);
    }
    ValueField::new(grid, p.times, p.label(), values)
}

/// Mortensen observer read off one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    /// All nodes within the tie tolerance of the minimum, in node order.
    pub ties: Vec<usize>,
}

/// Minimizers of row `k` over reachable nodes of `closure(G)`.
///
/// Nodes within `1e-9 (1 + |min|)` of the minimum are all reported; the
/// first in lexicographic node order is the observer.
pub fn extract_observer(field: &ValueField, k: usize) -> Result<Observer> {
    if k >= field.rows() {
        return Err(Error::param("k", format!("row {k} out of range (rows: {})", field.rows())));
    }
    let (_, min) = field.row_min(k).ok_or(Error::EmptyRow(k))?;
    let tie_tol = 1e-9 * (1.0 + min.abs());
    let row = field.row(k);
    let ties: Vec<usize> = (0..field.grid.len())
        .filter(|&i| field.grid.inside(i) && is_reachable(row[i]) && row[i] <= min + tie_tol)
        .collect();
    let index = ties[0];
    Ok(Observer {
        index,
        point: field.grid.node(index),
        value: row[index],
        ties,
    })
}

/// Re-derives sampled entries of `field` by one macro step of length `tau`
/// with a constant lattice control, started from row `k - tau/dt`, and
/// returns the largest deviation from the stored values. Controls are
/// optimized as in the recursion itself.
///
/// For `tau = dt` this repeats the recursion exactly. Longer steps follow
/// every branch of the step map (free and sliding along the wall), keeping
/// the eight cheapest partial paths.
pub fn bellman_residual(p: &DpProblem, field: &ValueField, tau: f64, samples: usize, seed: u64) -> Result<f64> {
    let dt = p.times.dt;
    let t_end = p.times.t_end();
    let m = (tau / dt).round();
    if !(tau > 0.0) || m < 1.0 || (m * dt - tau).abs() > 1e-9 * tau || tau > t_end + 1e-12 {
        return Err(Error::InvalidTau { tau, dt, t: t_end });
    }
    let m = m as usize;
    if !field.times.same_as(&p.times) {
        return Err(Error::GridMismatch("field and problem time grids differ".into()));
    }
    let grid = &field.grid;
    let mut cands = Vec::new();
    for k in m..field.rows() {
        let row = field.row(k);
        for i in 0..grid.len() {
            if grid.inside(i) && is_reachable(row[i]) {
                cands.push((k, i));
            }
        }
    }
    let picked: Vec<(usize, usize)> = if samples == 0 || samples >= cands.len() {
        cands
    } else {
        let mut r = rng::stream(seed, 0);
        (0..samples).map(|_| cands[r.random_range(0..cands.len())]).collect()
    };
    let worst = picked
        .par_iter()
        .map(|&(k, i)| {
            let again = macro_step(p, field, k, i, m);
            (again - field.value(k, i)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

fn macro_step(p: &DpProblem, field: &ValueField, k: usize, i: usize, m: usize) -> f64 {
    const BEAM: usize = 8;
    let grid = &field.grid;
    let n = grid.dim();
    let dt = p.times.dt;
    let start = field.row(k - m);
    let mut scratch = vec![0.0; p.vf.obs_dim()];
    let mut buf = Vec::with_capacity(8);
    let mut x0 = [0.0; 2];
    grid.node_into(i, &mut x0[..n]);
    p.minimize_controls(|w| {
        let mut best = SENTINEL;
        let mut front: Vec<(Pt, f64)> = vec![(x0, 0.0)];
        for s in 0..m {
            let t = p.times.t(k - 1 - s);
            let mut next: Vec<(Pt, f64)> = Vec::new();
            for (pt, acc) in &front {
                let normals = p.normals_at(&pt[..n]);
                p.sources(t, &pt[..n], w, &normals, &mut buf);
                for src in &buf {
                    if !grid.covers(&src[..n]) {
                        continue;
                    }
                    next.push((*src, acc + dt * p.cost.running(&p.vf, t, &src[..n], w, &mut scratch)));
                }
            }
            if s + 1 < m && next.len() > 1 {
                next.sort_by(|a, b| a.1.total_cmp(&b.1));
                next.dedup_by(|a, b| (0..n).all(|q| (a.0[q] - b.0[q]).abs() <= 1e-12));
                next.truncate(BEAM);
            }
            front = next;
            if front.is_empty() {
                break;
            }
        }
        for (pt, acc) in &front {
            if let Some(v0) = grid.interpolate(start, &pt[..n], |j| is_reachable(start[j])) {
                best = best.min(v0 + acc);
            }
        }
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::InitialCost;
    use crate::fields::{Drift, Mat, Observation};
    use crate::paths::ObservationPath;

    fn problem_1d(b: Drift, obs: Observation, ydot: f64, psi: InitialCost, t: f64, dt: f64, nodes: usize, controls: usize) -> DpProblem {
        let vf = VectorFieldSpec::scalar(b, obs).unwrap();
        let d = Domain::interval(0.0, 1.0).unwrap();
        let times = TimeGrid::span(0.0, t, dt).unwrap();
        let grid = StateGrid::new(d.clone(), &[nodes]).unwrap();
        let om = ControlLattice::default_omega_max(&vf, &d, t);
        DpProblem::new(
            vf,
            grid,
            CostSpec::new(psi, ObservationPath::constant(times, &[ydot])),
            DpMode::Constrained,
            ControlLattice::new(1, controls, om).unwrap(),
            times,
        )
        .unwrap()
    }

    fn quad(c: f64, p0: f64) -> InitialCost {
        InitialCost::quadratic(vec![c], Mat::from_rows(vec![vec![p0]]).unwrap()).unwrap()
    }

    #[test]
    fn first_row_is_psi() {
        let p = problem_1d(Drift::Constant { value: vec![0.0] }, Observation::Zero { dim: 1 }, 0.0, quad(0.5, 1.0), 0.1, 0.01, 21, 21);
        let f = dp_solve(&p).unwrap();
        for i in 0..21 {
            assert_eq!(f.value(0, i), p.cost.psi.eval(&f.grid.node(i)));
        }
    }

    #[test]
    fn resting_at_the_center_costs_nothing() {
        let p = problem_1d(Drift::Constant { value: vec![0.0] }, Observation::Zero { dim: 1 }, 0.0, quad(0.5, 1.0), 0.2, 0.01, 101, 21);
        let f = dp_solve(&p).unwrap();
        for k in 0..f.rows() {
            let obs = extract_observer(&f, k).unwrap();
            assert!(obs.value.abs() < 1e-12);
            assert!((obs.point[0] - 0.5).abs() < 1e-12);
            assert!(f.row(k).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn observer_migrates_toward_observed_state() {
        let mut p = problem_1d(Drift::Constant { value: vec![0.0] }, Observation::Identity { dim: 1 }, 0.5, quad(0.2, 0.1), 2.0, 0.01, 101, 21);
        let f = dp_solve(&p).unwrap();
        let path: Vec<f64> = (0..f.rows()).step_by(10).map(|k| extract_observer(&f, k).unwrap().point[0]).collect();
        assert!((path[0] - 0.2).abs() < 1e-12);
        assert!(path.windows(2).all(|w| w[1] >= w[0]), "{path:?}");
        assert!(*path.last().unwrap() > 0.35, "{path:?}");

        // finer lattice: the observer tracks the scalar Kalman mean
        // xhat(t) = 0.5 - 0.3 exp(-int_0^t P), P(t) = tanh(t + atanh 0.1)
        p.controls = ControlLattice::new(1, 101, 2.0).unwrap();
        let f = dp_solve(&p).unwrap();
        let a = 0.1f64.atanh();
        for t in [0.5, 1.0, 2.0] {
            let k = f.index_of(t).unwrap();
            let gain = (t + a).cosh().ln() - a.cosh().ln();
            let xhat = 0.5 - 0.3 * (-gain).exp();
            let got = extract_observer(&f, k).unwrap().point[0];
            assert!((got - xhat).abs() <= 0.02, "t={t}: {got} vs {xhat}");
        }
    }

    #[test]
    fn tie_reporting() {
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[5]).unwrap();
        let times = TimeGrid::new(0.0, 0.1, 1).unwrap();
        let f = ValueField::new(grid, times, FieldLabel::Constrained, [1.0, 0.0, 0.5, 0.0, 2.0].repeat(2)).unwrap();
        let o = extract_observer(&f, 0).unwrap();
        assert_eq!(o.index, 1);
        assert_eq!(o.ties, vec![1, 3]);
        let dead = ValueField::new(f.grid.clone(), times, FieldLabel::Constrained, vec![SENTINEL; 10]).unwrap();
        assert!(matches!(extract_observer(&dead, 0), Err(Error::EmptyRow(0))));
    }

    #[test]
    fn single_step_bellman_is_exact() {
        let p = problem_1d(Drift::Constant { value: vec![1.0] }, Observation::Identity { dim: 1 }, 0.3, quad(0.4, 0.5), 0.2, 0.01, 51, 21);
        let f = dp_solve(&p).unwrap();
        assert_eq!(bellman_residual(&p, &f, 0.01, 0, 1).unwrap(), 0.0);
        assert!(bellman_residual(&p, &f, 0.02, 200, 1).unwrap() < 1e-2);
        assert!(matches!(bellman_residual(&p, &f, 0.3, 10, 1), Err(Error::InvalidTau { .. })));
        assert!(matches!(bellman_residual(&p, &f, 0.015, 10, 1), Err(Error::InvalidTau { .. })));
    }

    #[test]
    fn outward_drift_can_rest_on_the_wall() {
        // staying at x = 1 under b = +1 needs no control and no misfit
        let p = problem_1d(Drift::Constant { value: vec![1.0] }, Observation::Identity { dim: 1 }, 1.0, quad(1.0, 0.1), 0.5, 0.01, 51, 21);
        let f = dp_solve(&p).unwrap();
        let last = f.rows() - 1;
        assert!(f.value(last, 50).abs() < 1e-12);
        assert_eq!(extract_observer(&f, last).unwrap().index, 50);
    }

    #[test]
    fn lattice_shape() {
        let l = ControlLattice::new(2, 3, 1.0).unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l.point(4), &[0.0, 0.0]);
        assert_eq!(l.point(0), &[-1.0, -1.0]);
        assert!(ControlLattice::new(1, 4, 1.0).is_err());
        assert!(ControlLattice::new(1, 5, 0.0).is_err());
    }

}
