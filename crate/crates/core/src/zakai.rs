//! Frozen-observation Zakai equation for reflected 1D dynamics,
//!
//! ```text
//! dq/dt = d/dx [ -q b + (eps/2) dq/dx ] - |ydot - h|^2 q / (2 eps),
//! -q b.n + (eps/2) dq/dn = 0 on the walls,
//! ```
//!
//! its backward dual, and the Laplace functional.
//!
//! Both solvers use a vertex-centred lattice (half cells at the walls) and
//! a symmetric IMEX split per step: half a reaction step (exact
//! exponential), explicit upwind advection, implicit diffusion, half a
//! reaction step. The forward solver is a finite-volume scheme and applies
//! the cell-averaged potential; the dual is a finite-difference scheme and
//! applies nodal values. Rows are kept as `values * exp(log_scale)` with
//! the row maximum normalised to one, so tiny densities never underflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::InitialCost;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fields::VectorFieldSpec;
use crate::grid::{FieldLabel, StateGrid, ValueField, SENTINEL};
use crate::paths::{ObservationPath, TimeGrid};

/// Test function `Phi` of the Laplace functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Probe {
    Zero,
    /// `slope * x + offset`
    Linear {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `weight * (x - center)^2`
    Quadratic { center: f64, weight: f64 },
    /// `|x - point|`
    Distance { point: f64 },
}

impl Probe {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Probe::Zero => 0.0,
            Probe::Linear { slope, offset } => slope * x + offset,
            Probe::Quadratic { center, weight } => weight * (x - center).powi(2),
            Probe::Distance { point } => (x - point).abs(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Probe::Zero => "zero",
            Probe::Linear { .. } => "linear",
            Probe::Quadratic { .. } => "quadratic",
            Probe::Distance { .. } => "distance",
        }
    }
}

/// Probe plus a strictly decreasing list of noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProbe {
    pub phi: Probe,
    pub epsilons: Vec<f64>,
}

impl LaplaceProbe {
    pub fn new(phi: Probe, epsilons: Vec<f64>) -> Result<Self> {
        let p = LaplaceProbe { phi, epsilons };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::param("epsilons", "sweep list is empty"));
        }
        if self.epsilons.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::param("epsilons", "noise levels must be positive"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("epsilons", "sweep must be strictly decreasing"));
        }
        Ok(())
    }
}

/// Row-scaled nonnegative table on a 1D vertex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRows {
    pub grid: StateGrid,
    pub times: TimeGrid,
    pub epsilon: f64,
    values: Vec<f64>,
    log_scale: Vec<f64>,
}

impl ScaledRows {
    pub fn rows(&self) -> usize {
        self.log_scale.len()
    }

    pub fn cells(&self) -> usize {
        self.grid.len()
    }

    /// Normalised row `k`; the true values are `row * exp(log_scale(k))`.
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.cells();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn log_scale(&self, k: usize) -> f64 {
        self.log_scale[k]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.row(k)[i] * self.log_scale[k].exp()
    }

    pub fn log_value(&self, k: usize, i: usize) -> f64 {
        self.row(k)[i].ln() + self.log_scale[k]
    }

    /// `log int f(t_k, x) dx`.
    pub fn log_mass(&self, k: usize) -> f64 {
        let w = cell_widths(&self.grid);
        let s: f64 = self.row(k).iter().zip(&w).map(|(v, w)| v * w).sum();
        s.ln() + self.log_scale[k]
    }

    /// `-eps log f` as a value table (the sentinel where `f` vanishes).
    pub fn log_transform(&self) -> Result<ValueField> {
        let values = (0..self.rows())
            .flat_map(|k| (0..self.cells()).map(move |i| (k, i)))
            .map(|(k, i)| {
                let v = self.row(k)[i];
                if v > 0.0 {
                    -self.epsilon * (v.ln() + self.log_scale[k])
                } else {
                    SENTINEL
                }
            })
            .collect();
        ValueField::new(self.grid.clone(), self.times, FieldLabel::ZakaiLog { epsilon: self.epsilon }, values)
    }
}

/// Unnormalised filtering density `q(t_k, x_i)`.
pub type FilterDensity = ScaledRows;

/// Backward dual `Phi^eps(s_k, x_i)` on the same time grid.
pub type DualField = ScaledRows;

fn cell_widths(grid: &StateGrid) -> Vec<f64> {
    let n = grid.len();
    let h = grid.spacing(0);
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect()
}

fn check_setup(vf: &VectorFieldSpec, grid: &StateGrid, obs: &ObservationPath, epsilon: f64, times: &TimeGrid) -> Result<()> {
    vf.validate()?;
    if !matches!(grid.domain(), Domain::Interval { .. }) || grid.is_extended() {
        return Err(Error::param("domain", "the Zakai solver runs on an interval lattice"));
    }
    if vf.state_dim() != 1 || vf.noise_dim() != 1 || !vf.sigma_is_identity() {
        return Err(Error::param("vf", "the Zakai solver needs scalar dynamics with sigma = 1"));
    }
    if obs.dim != vf.obs_dim() {
        return Err(Error::Dimension {
            what: "observation path",
            expected: vf.obs_dim(),
            got: obs.dim,
        });
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    obs.check_step(times.dt)?;
    if times.t_end() > obs.grid.t_end() + 1e-9 * times.dt {
        return Err(Error::GridMismatch("horizon exceeds the observation path".into()));
    }
    Ok(())
}

/// Shared coefficients of one grid.
struct Operator {
    x: Vec<f64>,
    w: Vec<f64>,
    h: f64,
    /// Drift at the nodes and at the faces `x_{i + 1/2}`.
    b_node: Vec<f64>,
    b_face: Vec<f64>,
}

impl Operator {
    fn new(vf: &VectorFieldSpec, grid: &StateGrid, t: f64) -> Self {
        let n = grid.len();
        let h = grid.spacing(0);
        let x: Vec<f64> = (0..n).map(|i| grid.coord(0, i)).collect();
        let b_node = x.iter().map(|&xi| vf.drift(t, &[xi])[0]).collect();
        let b_face = x.windows(2).map(|p| vf.drift(t, &[0.5 * (p[0] + p[1])])[0]).collect();
        Operator {
            w: cell_widths(grid),
            x,
            h,
            b_node,
            b_face,
        }
    }

    /// `exp(-dt |ydot - h(x_i)|^2 / (2 eps))` for each node.
    fn nodal_decay(&self, vf: &VectorFieldSpec, ydot: &[f64], dt: f64, eps: f64) -> Vec<f64> {
        let mut scratch = vec![0.0; vf.obs_dim()];
        self.x
            .iter()
            .map(|&xi| (-dt * 0.5 * vf.misfit_sq(0.0, &[xi], ydot, &mut scratch) / eps).exp())
            .collect()
    }

    /// Same with the potential averaged over each cell (Simpson's rule).
    fn cell_decay(&self, vf: &VectorFieldSpec, ydot: &[f64], dt: f64, eps: f64) -> Vec<f64> {
        let mut scratch = vec![0.0; vf.obs_dim()];
        let n = self.x.len();
        let half = 0.5 * self.h;
        let mut m = |x: f64| 0.5 * vf.misfit_sq(0.0, &[x], ydot, &mut scratch);
        (0..n)
            .map(|i| {
                let lo = if i == 0 { self.x[0] } else { self.x[i] - half };
                let hi = if i + 1 == n { self.x[i] } else { self.x[i] + half };
                let avg = (m(lo) + 4.0 * m(0.5 * (lo + hi)) + m(hi)) / 6.0;
                (-dt * avg / eps).exp()
            })
            .collect()
    }

    /// Solves `(W + dt eps/(2h) K) u = rhs` where `K` is the Neumann
    /// stiffness matrix and `W = diag(w)` (`weighted`) or `I`
    /// (`!weighted`, then `K` is scaled by `1/w`).
    fn diffuse(&self, u: &mut [f64], dt: f64, eps: f64, weighted: bool) {
        let n = u.len();
        let c = dt * eps / (2.0 * self.h);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let scale = if weighted { 1.0 } else { 1.0 / self.w[i] };
            let mass = if weighted { self.w[i] } else { 1.0 };
            if i > 0 {
                lower[i] = -c * scale;
                diag[i] += c * scale;
            }
            if i + 1 < n {
                upper[i] = -c * scale;
                diag[i] += c * scale;
            }
            diag[i] += mass;
            if weighted {
                u[i] *= self.w[i];
            }
        }
        thomas(&lower, &mut diag, &upper, u);
    }
}

/// In-place tridiagonal solve; `diag` is overwritten.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// Divides by the row maximum and returns its log.
fn renormalise(u: &mut [f64]) -> f64 {
    let m = u.iter().copied().fold(0.0, f64::max);
    if m > 0.0 && m.is_finite() {
        u.iter_mut().for_each(|v| *v /= m);
        m.ln()
    } else {
        0.0
    }
}

/// Cells sampled from `exp(-psi / eps)`, returned normalised with the log
/// of the factor taken out.
pub fn initial_density(grid: &StateGrid, psi: &InitialCost, epsilon: f64) -> (Vec<f64>, f64) {
    let lv: Vec<f64> = (0..grid.len()).map(|i| -psi.eval(&grid.node(i)) / epsilon).collect();
    let top = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lv.iter().map(|v| (v - top).exp()).collect(), top)
}

/// Forward solve from cell samples `q0 > 0`.
pub fn zakai_solve(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    obs: &ObservationPath,
    q0: &[f64],
    epsilon: f64,
    times: TimeGrid,
) -> Result<FilterDensity> {
    if q0.len() != grid.len() {
        return Err(Error::Dimension {
            what: "initial density",
            expected: grid.len(),
            got: q0.len(),
        });
    }
    if q0.iter().any(|&v| !(v.is_finite() && v >= 0.0)) || q0.iter().all(|&v| v == 0.0) {
        return Err(Error::param("q0", "initial density must be nonnegative, finite and not identically zero"));
    }
    let mut u = q0.to_vec();
    let s = renormalise(&mut u);
    solve_forward(vf, grid, obs, u, s, epsilon, times)
}

/// Forward solve from `q0 = exp(-psi / eps)`.
pub fn zakai_solve_psi(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    obs: &ObservationPath,
    psi: &InitialCost,
    epsilon: f64,
    times: TimeGrid,
) -> Result<FilterDensity> {
    psi.validate(Some(1))?;
    let (u, s) = initial_density(grid, psi, epsilon);
    solve_forward(vf, grid, obs, u, s, epsilon, times)
}

fn solve_forward(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    obs: &ObservationPath,
    mut u: Vec<f64>,
    mut scale: f64,
    eps: f64,
    times: TimeGrid,
) -> Result<FilterDensity> {
    check_setup(vf, grid, obs, eps, &times)?;
    let n = grid.len();
    let dt = times.dt;
    let mut values = Vec::with_capacity((times.steps + 1) * n);
    let mut log_scale = Vec::with_capacity(times.steps + 1);
    values.extend_from_slice(&u);
    log_scale.push(scale);
    let mut flux = vec![0.0; n + 1];
    for k in 0..times.steps {
        let t = times.t(k);
        let op = Operator::new(vf, grid, t);
        for i in 0..n {
            let out = op.b_face.get(i).map_or(0.0, |b| b.max(0.0)) + if i > 0 { (-op.b_face[i - 1]).max(0.0) } else { 0.0 };
            if dt * out > op.w[i] * (1.0 + 1e-12) {
                return Err(Error::Cfl(format!(
                    "advection step dt = {dt} exceeds the upwind limit {:.3e}",
                    op.w[i] / out
                )));
            }
        }
        let decay = op.cell_decay(vf, obs.at(t + 0.5 * dt), 0.5 * dt, eps);
        u.iter_mut().zip(&decay).for_each(|(v, r)| *v *= r);
        // upwind transport fluxes, zero at the walls
        for f in 0..n - 1 {
            let b = op.b_face[f];
            flux[f + 1] = b.max(0.0) * u[f] - (-b).max(0.0) * u[f + 1];
        }
        for i in 0..n {
            u[i] -= dt / op.w[i] * (flux[i + 1] - flux[i]);
        }
        op.diffuse(&mut u, dt, eps, true);
        u.iter_mut().zip(&decay).for_each(|(v, r)| *v *= r);
        if let Some((cell, &value)) = u.iter().enumerate().find(|(_, v)| **v < 0.0 || !v.is_finite()) {
            return Err(Error::NegativeDensity { step: k + 1, cell, value });
        }
        scale += renormalise(&mut u);
        values.extend_from_slice(&u);
        log_scale.push(scale);
    }
    Ok(ScaledRows {
        grid: grid.clone(),
        times,
        epsilon: eps,
        values,
        log_scale,
    })
}

/// Backward dual on `times` with terminal data `exp(-Phi/eps)` at
/// `times.t_end()` and homogeneous Neumann walls. Row `k` holds `s = t_k`.
pub fn dual_solve(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    obs: &ObservationPath,
    phi: &Probe,
    epsilon: f64,
    times: TimeGrid,
) -> Result<DualField> {
    check_setup(vf, grid, obs, epsilon, &times)?;
    let n = grid.len();
    let dt = times.dt;
    let h = grid.spacing(0);
    let lv: Vec<f64> = (0..n).map(|i| -phi.eval(grid.coord(0, i)) / epsilon).collect();
    let top = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut u: Vec<f64> = lv.iter().map(|v| (v - top).exp()).collect();
    let mut scale = top;
    let mut rows = vec![(u.clone(), scale)];
    for k in (0..times.steps).rev() {
        let t = times.t(k);
        let op = Operator::new(vf, grid, t);
        if let Some(bmax) = op.b_node.iter().map(|b| b.abs()).reduce(f64::max) {
            if dt * bmax > h * (1.0 + 1e-12) {
                return Err(Error::Cfl(format!("advection step dt = {dt} exceeds the upwind limit {:.3e}", h / bmax)));
            }
        }
        let decay = op.nodal_decay(vf, obs.at(t + 0.5 * dt), 0.5 * dt, epsilon);
        u.iter_mut().zip(&decay).for_each(|(v, r)| *v *= r);
        // b . grad Phi, upwind for the backward direction; mirror walls
        let prev = u.clone();
        for i in 0..n {
            let b = op.b_node[i];
            let d = if b > 0.0 {
                if i + 1 < n { (prev[i + 1] - prev[i]) / h } else { 0.0 }
            } else if i > 0 {
                (prev[i] - prev[i - 1]) / h
            } else {
                0.0
            };
            u[i] = prev[i] + dt * b * d;
        }
        op.diffuse(&mut u, dt, epsilon, false);
        u.iter_mut().zip(&decay).for_each(|(v, r)| *v *= r);
        if let Some((cell, &value)) = u.iter().enumerate().find(|(_, v)| **v < 0.0 || !v.is_finite()) {
            return Err(Error::NegativeDensity { step: k, cell, value });
        }
        scale += renormalise(&mut u);
        rows.push((u.clone(), scale));
    }
    rows.reverse();
    let mut values = Vec::with_capacity(rows.len() * n);
    let mut log_scale = Vec::with_capacity(rows.len());
    for (r, s) in rows {
        values.extend(r);
        log_scale.push(s);
    }
    Ok(ScaledRows {
        grid: grid.clone(),
        times,
        epsilon,
        values,
        log_scale,
    })
}

fn log_pairing(a: &ScaledRows, ka: usize, b: &ScaledRows, kb: usize) -> f64 {
    let w = cell_widths(&a.grid);
    let s: f64 = a.row(ka).iter().zip(b.row(kb)).zip(&w).map(|((x, y), w)| x * y * w).sum();
    s.ln() + a.log_scale(ka) + b.log_scale(kb)
}

/// Relative mismatch `|<Phi(t), q(t)> - <Phi(0), q(0)>| / <Phi(0), q(0)>`
/// of the pairing that the exact flows conserve.
pub fn duality_gap(fd: &FilterDensity, dual: &DualField) -> Result<f64> {
    if fd.grid != dual.grid || !fd.times.same_as(&dual.times) || fd.epsilon != dual.epsilon {
        return Err(Error::GridMismatch("density and dual live on different grids".into()));
    }
    let end = fd.rows() - 1;
    let now = log_pairing(fd, end, dual, end);
    let start = log_pairing(fd, 0, dual, 0);
    Ok((now - start).exp_m1().abs())
}

/// `-eps log int exp(-Phi/eps) q(t_k, x) dx`, evaluated as
/// `min_i [Phi + V_i] - eps log sum_i w_i exp(-(Phi + V_i - min)/eps)`.
pub fn laplace_functional(fd: &FilterDensity, phi: &Probe, k: usize) -> Result<f64> {
    if k >= fd.rows() {
        return Err(Error::param("k", format!("row {k} out of range")));
    }
    let eps = fd.epsilon;
    let w = cell_widths(&fd.grid);
    let e: Vec<f64> = (0..fd.cells())
        .map(|i| {
            let v = fd.row(k)[i];
            if v > 0.0 {
                phi.eval(fd.grid.coord(0, i)) - eps * (v.ln() + fd.log_scale(k))
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let m = e.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return Err(Error::EmptyRow(k));
    }
    let s: f64 = e.iter().zip(&w).map(|(v, w)| w * (-(v - m) / eps).exp()).sum();
    Ok(m - eps * s.ln())
}

/// One value per noise level of the probe, at the final time.
pub fn laplace_sweep(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    obs: &ObservationPath,
    psi: &InitialCost,
    probe: &LaplaceProbe,
    times: TimeGrid,
) -> Result<Vec<f64>> {
    probe.validate()?;
    probe
        .epsilons
        .par_iter()
        .map(|&eps| {
            let fd = zakai_solve_psi(vf, grid, obs, psi, eps, times)?;
            laplace_functional(&fd, &probe.phi, fd.rows() - 1)
        })
        .collect()
}

/// One-sided outward normal slopes of `-eps log q` at the two walls of
/// row `k`: `(left, right)`.
pub fn wall_slopes(fd: &FilterDensity, k: usize) -> (f64, f64) {
    let n = fd.cells();
    let h = fd.grid.spacing(0);
    let v = |i: usize| -fd.epsilon * fd.log_value(k, i);
    ((v(0) - v(1)) / h, (v(n - 1) - v(n - 2)) / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Drift, Mat, Observation};

    fn still(obs: Observation) -> VectorFieldSpec {
        VectorFieldSpec::scalar(Drift::Constant { value: vec![0.0] }, obs).unwrap()
    }

    #[test]
    fn uniform_density_is_steady() {
        let vf = still(Observation::Zero { dim: 1 });
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[51]).unwrap();
        let times = TimeGrid::span(0.0, 1.0, 0.01).unwrap();
        let fd = zakai_solve(&vf, &grid, &ObservationPath::constant(times, &[0.0]), &vec![2.0; 51], 0.1, times).unwrap();
        for k in 0..fd.rows() {
            for i in 0..51 {
                assert!((fd.value(k, i) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_is_conserved_without_potential() {
        let vf = VectorFieldSpec::scalar(
            Drift::Linear { matrix: Mat::from_rows(vec![vec![-1.0]]).unwrap(), offset: Some(vec![0.8]) },
            Observation::Zero { dim: 1 },
        )
        .unwrap();
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[101]).unwrap();
        let times = TimeGrid::span(0.0, 1.0, 0.001).unwrap();
        let q0: Vec<f64> = (0..101).map(|i| (-((grid.coord(0, i) - 0.4) / 0.1).powi(2)).exp()).collect();
        let fd = zakai_solve(&vf, &grid, &ObservationPath::constant(times, &[0.0]), &q0, 0.02, times).unwrap();
        let m0 = fd.log_mass(0).exp();
        for k in 0..fd.rows() {
            assert!((fd.log_mass(k).exp() - m0).abs() <= 1e-12);
        }
        assert!(fd.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn dual_of_flat_data_is_one() {
        let vf = still(Observation::Zero { dim: 1 });
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[21]).unwrap();
        let times = TimeGrid::span(0.0, 0.5, 0.01).unwrap();
        let d = dual_solve(&vf, &grid, &ObservationPath::constant(times, &[0.0]), &Probe::Zero, 0.1, times).unwrap();
        for k in 0..d.rows() {
            for i in 0..21 {
                assert!((d.value(k, i) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_potential_duality_is_exact() {
        let vf = VectorFieldSpec::scalar(Drift::Constant { value: vec![0.3] }, Observation::Zero { dim: 1 }).unwrap();
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[41]).unwrap();
        let times = TimeGrid::span(0.0, 0.5, 0.005).unwrap();
        let obs = ObservationPath::constant(times, &[0.0]);
        let q0: Vec<f64> = (0..41).map(|i| 1.0 + grid.coord(0, i)).collect();
        let fd = zakai_solve(&vf, &grid, &obs, &q0, 0.05, times).unwrap();
        let d = dual_solve(&vf, &grid, &obs, &Probe::Zero, 0.05, times).unwrap();
        assert!(duality_gap(&fd, &d).unwrap() <= 1e-10);
    }

    #[test]
    fn laplace_of_zero_probe_is_log_mass() {
        let vf = still(Observation::Identity { dim: 1 });
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[41]).unwrap();
        let times = TimeGrid::span(0.0, 0.2, 0.01).unwrap();
        let psi = InitialCost::quadratic(vec![0.5], Mat::from_rows(vec![vec![0.1]]).unwrap()).unwrap();
        let fd = zakai_solve_psi(&vf, &grid, &ObservationPath::constant(times, &[0.6]), &psi, 0.05, times).unwrap();
        let k = fd.rows() - 1;
        let l = laplace_functional(&fd, &Probe::Zero, k).unwrap();
        assert!((l + 0.05 * fd.log_mass(k)).abs() < 1e-12);
    }

    #[test]
    fn sweep_validation() {
        assert!(LaplaceProbe::new(Probe::Zero, vec![]).is_err());
        assert!(LaplaceProbe::new(Probe::Zero, vec![0.1, 0.2]).is_err());
        assert!(LaplaceProbe::new(Probe::Zero, vec![0.2, 0.1]).is_ok());
    }
}
