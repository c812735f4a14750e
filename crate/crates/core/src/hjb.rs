//! Explicit monotone solver for the forward HJB equation
//!
//! ```text
//! dV/dt + b.DV + |DV|^2 / 2 - |ydot - h|^2 / 2 = 0,    V(0, .) = psi,
//! ```
//!
//! closed at the wall by a mirror ghost node carrying the normal slope
//! `dV/dn = -b.n` (sub mode) or `dV/dn = -2 b.n` (super mode).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fields::VectorFieldSpec;
use crate::grid::{is_reachable, FieldLabel, StateGrid, ValueField};
use crate::paths::TimeGrid;

type Pt = [f64; 2];

/// Sub-steps allowed inside one output interval before giving up.
const MAX_SUBSTEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flux {
    LaxFriedrichs,
    /// Exact for the separable Hamiltonian; upwind in 1D.
    Godunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Sub,
    Super,
}

impl BoundaryMode {
    /// Multiplier `c` in `dV/dn = -c b.n`.
    fn factor(self) -> f64 {
        match self {
            BoundaryMode::Sub => 1.0,
            BoundaryMode::Super => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbScheme {
    pub flux: Flux,
    pub cfl: f64,
    pub mode: BoundaryMode,
}

impl HjbScheme {
    pub fn new(flux: Flux, cfl: f64, mode: BoundaryMode) -> Result<Self> {
        let s = HjbScheme { flux, cfl, mode };
        s.validate()?;
        Ok(s)
    }

    /// Godunov in 1D, Lax–Friedrichs otherwise, CFL 0.9.
    pub fn default_for(dim: usize, mode: BoundaryMode) -> Self {
        HjbScheme {
            flux: if dim == 1 { Flux::Godunov } else { Flux::LaxFriedrichs },
            cfl: 0.9,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Cfl(format!("CFL number must lie in (0, 1], got {}", self.cfl)));
        }
        Ok(())
    }

    fn label(&self) -> FieldLabel {
        match self.mode {
            BoundaryMode::Sub => FieldLabel::HjbSub,
            BoundaryMode::Super => FieldLabel::HjbSuper,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Node(usize),
    Ghost(Ghost),
}

/// Mirror closure for a missing neighbour `y`: with `p = P(y)`, `n` the
/// normal at `p` and `d = |y - p|`, the ghost value is
/// `V(y - 2 d n) + 2 d dV/dn`, the mirror value read by interpolation.
#[derive(Debug, Clone, Copy)]
struct Ghost {
    mirror: Pt,
    wall: Pt,
    normal: Pt,
    gap: f64,
}

/// Neighbourhood of one active node.
#[derive(Debug, Clone)]
struct Cell {
    node: usize,
    x: Pt,
    sides: [[Side; 2]; 2],
    /// Outward normal used by the ghost closure, if any side is a ghost.
    normal: Option<Pt>,
}

fn stencil(grid: &StateGrid) -> Vec<Cell> {
    let d = grid.domain();
    let n = grid.dim();
    (0..grid.len())
        .filter(|&i| grid.active(i))
        .map(|i| {
            let mut x = [0.0; 2];
            grid.node_into(i, &mut x[..n]);
            let mut sides = [[Side::Node(i); 2]; 2];
            let mut ghost = false;
            for (a, s) in sides.iter_mut().enumerate().take(n) {
                for (k, dir) in [-1.0f64, 1.0].into_iter().enumerate() {
                    s[k] = match grid.neighbour(i, a, dir as isize) {
                        Some(j) if grid.active(j) => Side::Node(j),
                        _ => {
                            ghost = true;
                            let mut y = x;
                            y[a] += dir * grid.spacing(a);
                            Side::Ghost(mirror(d, &y[..n], a, dir))
                        }
                    };
                }
            }
            let normal = ghost.then(|| wall_normal(d, &x[..n], &sides));
            Cell { node: i, x, sides, normal }
        })
        .collect()
}

fn mirror(d: &Domain, y: &[f64], axis: usize, dir: f64) -> Ghost {
    let n = y.len();
    let mut p = [0.0; 2];
    d.project_into(y, &mut p[..n]);
    let gap: f64 = (0..n).map(|i| (y[i] - p[i]).powi(2)).sum::<f64>().sqrt();
    let mut normal = [0.0; 2];
    if gap > 0.0 {
        for i in 0..n {
            normal[i] = (y[i] - p[i]) / gap;
        }
    } else {
        normal[axis] = dir;
    }
    let mut m = [0.0; 2];
    for i in 0..n {
        m[i] = y[i] - 2.0 * gap * normal[i];
    }
    Ghost {
        mirror: m,
        wall: p,
        normal,
        gap,
    }
}

/// Outward normal at the wall next to `x`: the face normal(s) for boxes,
/// the radial direction for balls.
fn wall_normal(d: &Domain, x: &[f64], sides: &[[Side; 2]; 2]) -> Pt {
    let mut out = [0.0; 2];
    match d {
        Domain::Ball { center, .. } => {
            let r: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
            if r > 0.0 {
                for i in 0..x.len() {
                    out[i] = (x[i] - center[i]) / r;
                }
            }
        }
        _ => {
            for (a, s) in sides.iter().enumerate().take(x.len()) {
                if matches!(s[0], Side::Ghost(_)) {
                    out[a] = -1.0;
                } else if matches!(s[1], Side::Ghost(_)) {
                    out[a] = 1.0;
                }
            }
            let r = (out[0] * out[0] + out[1] * out[1]).sqrt();
            if r > 0.0 {
                out[0] /= r;
                out[1] /= r;
            }
        }
    }
    out
}

struct Slopes {
    minus: Pt,
    plus: Pt,
}

struct Ctx<'a> {
    vf: &'a VectorFieldSpec,
    cost: &'a CostSpec,
    grid: &'a StateGrid,
    factor: f64,
}

impl Ctx<'_> {
    fn slopes(&self, c: &Cell, v: &[f64], t: f64) -> Slopes {
        let n = self.grid.dim();
        let vi = v[c.node];
        let mut dm = [0.0; 2];
        let mut dp = [0.0; 2];
        for a in 0..n {
            let h = self.grid.spacing(a);
            let side = |k: usize| match c.sides[a][k] {
                Side::Node(j) => v[j],
                Side::Ghost(g) => self.ghost_value(&g, vi, v, t),
            };
            dm[a] = (vi - side(0)) / h;
            dp[a] = (side(1) - vi) / h;
        }
        Slopes { minus: dm, plus: dp }
    }

    fn ghost_value(&self, g: &Ghost, vi: f64, v: &[f64], t: f64) -> f64 {
        let n = self.grid.dim();
        let mut b = [0.0; 2];
        self.vf.drift_into(t, &g.wall[..n], &mut b[..n]);
        let bn: f64 = (0..n).map(|i| b[i] * g.normal[i]).sum();
        let slope = -self.factor * bn;
        let base = self
            .grid
            .interpolate(v, &g.mirror[..n], |_| true)
            .unwrap_or(vi);
        base + 2.0 * g.gap * slope
    }

    fn misfit(&self, t: f64, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.cost.misfit(self.vf, t, x, scratch)
    }
}

/// `min` (if `a <= b`) or `max` (otherwise) of `q p + p^2/2` over `[a, b]`.
fn godunov_1d(q: f64, a: f64, b: f64) -> f64 {
    let f = |p: f64| q * p + 0.5 * p * p;
    if a <= b {
        f((-q).clamp(a, b))
    } else {
        f(a).max(f(b))
    }
}

/// Space-time table of the HJB solution on the rows of `times`.
pub fn hjb_solve(
    vf: &VectorFieldSpec,
    grid: &StateGrid,
    cost: &CostSpec,
    scheme: &HjbScheme,
    times: TimeGrid,
) -> Result<ValueField> {
    scheme.validate()?;
    vf.validate()?;
    let n = grid.dim();
    if vf.state_dim() != n {
        return Err(Error::Dimension {
            what: "state grid",
            expected: vf.state_dim(),
            got: n,
        });
    }
    if !vf.sigma_is_identity() {
        return Err(Error::param("diffusion", "the HJB Hamiltonian assumes sigma = identity"));
    }
    if grid.is_extended() {
        return Err(Error::param("grid", "the HJB solver runs on the base lattice"));
    }
    cost.psi.validate(Some(n))?;
    if cost.obs.dim != vf.obs_dim() {
        return Err(Error::Dimension {
            what: "observation path",
            expected: vf.obs_dim(),
            got: cost.obs.dim,
        });
    }
    cost.obs.check_step(times.dt)?;
    if times.t_end() > cost.obs.grid.t_end() + 1e-9 * times.dt {
        return Err(Error::GridMismatch("horizon exceeds the observation path".into()));
    }

    let cells = stencil(grid);
    let ctx = Ctx {
        vf,
        cost,
        grid,
        factor: scheme.mode.factor(),
    };
    let len = grid.len();
    let mut v: Vec<f64> = (0..len)
        .map(|i| if grid.active(i) { cost.psi.eval(&grid.node(i)) } else { f64::NAN })
        .collect();
    let mut values = Vec::with_capacity((times.steps + 1) * len);
    values.extend_from_slice(&v);
    let inv_h: Vec<f64> = (0..n).map(|a| 1.0 / grid.spacing(a)).collect();

    for k in 0..times.steps {
        let t_start = times.t(k);
        let mut elapsed = 0.0;
        let mut sub = 0usize;
        while elapsed < times.dt * (1.0 - 1e-12) {
            let t = t_start + elapsed;
            let slopes: Vec<Slopes> = cells.par_iter().with_min_len(512).map(|c| ctx.slopes(c, &v, t)).collect();
            // per-axis wave speeds
            let mut alpha = [0.0f64; 2];
            let mut b = [0.0; 2];
            for (c, s) in cells.iter().zip(&slopes) {
                vf.drift_into(t, &c.x[..n], &mut b[..n]);
                for a in 0..n {
                    let w = match scheme.flux {
                        Flux::Godunov => (b[a] + s.minus[a]).abs().max((b[a] + s.plus[a]).abs()),
                        Flux::LaxFriedrichs => b[a].abs() + s.minus[a].abs().max(s.plus[a].abs()),
                    };
                    alpha[a] = alpha[a].max(w);
                }
            }
            let rate: f64 = (0..n).map(|a| alpha[a] * inv_h[a]).sum();
            let remaining = times.dt - elapsed;
            let h = if rate > 0.0 { remaining.min(scheme.cfl / rate) } else { remaining };
            // the last sub-step lands exactly on the output row
            let h = if remaining - h < 1e-12 * times.dt { remaining } else { h };
            let updates: Vec<f64> = cells
                .par_iter()
                .zip(slopes.par_iter())
                .with_min_len(512)
                .map(|(c, s)| {
                    let mut bb = [0.0; 2];
                    vf.drift_into(t, &c.x[..n], &mut bb[..n]);
                    let mut scratch = [0.0; 8];
                    let mut scratch_v = Vec::new();
                    let sc: &mut [f64] = if vf.obs_dim() <= 8 {
                        &mut scratch[..vf.obs_dim()]
                    } else {
                        scratch_v.resize(vf.obs_dim(), 0.0);
                        &mut scratch_v
                    };
                    let m = ctx.misfit(t, &c.x[..n], sc);
                    let ham = match scheme.flux {
                        Flux::Godunov => (0..n).map(|a| godunov_1d(bb[a], s.minus[a], s.plus[a])).sum::<f64>() - m,
                        Flux::LaxFriedrichs => {
                            let mut hp = 0.0;
                            for a in 0..n {
                                let p = 0.5 * (s.minus[a] + s.plus[a]);
                                hp += bb[a] * p + 0.5 * p * p - 0.5 * alpha[a] * (s.plus[a] - s.minus[a]);
                            }
                            hp - m
                        }
                    };
                    v[c.node] - h * ham
                })
                .collect();
            for (c, u) in cells.iter().zip(updates) {
                if !u.is_finite() {
                    return Err(Error::NonFinite { step: k + 1 });
                }
                v[c.node] = u;
            }
            elapsed += h;
            sub += 1;
            if sub > MAX_SUBSTEPS {
                return Err(Error::Cfl(format!("more than {MAX_SUBSTEPS} sub-steps needed in step {}", k + 1)));
            }
        }
        values.extend_from_slice(&v);
    }
    ValueField::new(grid.clone(), times, scheme.label(), values)
}

/// Maxima of the discrete HJB residual and of both boundary relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `|dV/dt + H(t, x, DV)|` at interior nodes (centred differences).
    pub interior_max_residual: f64,
    /// `|b.n + dV/dn|` at wall nodes (one-sided normal slope).
    pub boundary_sub_residual: f64,
    /// `|b.n + dV/dn / 2|` at wall nodes.
    pub boundary_super_residual: f64,
    /// Nodes skipped as kinks.
    pub kinks: usize,
}

/// Discrete gradient of one row at one node.
struct Probe {
    grad: Pt,
    /// One-sided slope along axes with a single reachable neighbour.
    one_sided: [Option<f64>; 2],
    interior: bool,
    kink: bool,
}

fn probe(field: &ValueField, k: usize, c: &Cell, kink_tol: f64) -> Option<Probe> {
    let grid = &field.grid;
    let row = field.row(k);
    let i = c.node;
    if !is_reachable(row[i]) {
        return None;
    }
    let mut p = Probe {
        grad: [0.0; 2],
        one_sided: [None; 2],
        interior: c.normal.is_none(),
        kink: false,
    };
    for a in 0..grid.dim() {
        let h = grid.spacing(a);
        let slope = |side: Side, sign: f64| match side {
            Side::Node(j) if is_reachable(row[j]) => Some(sign * (row[j] - row[i]) / h),
            _ => None,
        };
        match (slope(c.sides[a][0], -1.0), slope(c.sides[a][1], 1.0)) {
            (Some(l), Some(u)) => {
                p.grad[a] = 0.5 * (l + u);
                p.kink |= (u - l).abs() > kink_tol;
            }
            (Some(s), None) | (None, Some(s)) => {
                p.interior = false;
                p.one_sided[a] = Some(s);
                p.grad[a] = s;
            }
            (None, None) => p.interior = false,
        }
    }
    Some(p)
}

/// Residuals of `field` against the HJB equation and the two boundary
/// relations, skipping kinks where one-sided slopes differ by more than
/// `10 dx Lip(psi)` (at least `10 dx`).
///
/// The interior residual pairs the forward time difference on
/// `[t_k, t_{k+1})` with the trapezoid of `H` over both rows, so it stays
/// consistent across jumps of the piecewise-constant `ydot`. Boundary
/// relations are checked on rows `k >= 1`.
pub fn hjb_residual_report(field: &ValueField, vf: &VectorFieldSpec, cost: &CostSpec) -> Result<ResidualReport> {
    let grid = &field.grid;
    let n = grid.dim();
    if vf.state_dim() != n {
        return Err(Error::Dimension {
            what: "state grid",
            expected: vf.state_dim(),
            got: n,
        });
    }
    let cells = stencil(grid);
    let kink_tol = 10.0 * grid.min_spacing() * cost.psi.lipschitz(grid.domain()).max(1.0);
    let dt = field.times.dt;
    let mut report = ResidualReport {
        interior_max_residual: 0.0,
        boundary_sub_residual: 0.0,
        boundary_super_residual: 0.0,
        kinks: 0,
    };
    let mut scratch = vec![0.0; vf.obs_dim()];
    let mut b = [0.0; 2];
    for k in 0..field.rows() {
        let t = field.times.t(k);
        for c in &cells {
            let Some(now) = probe(field, k, c, kink_tol) else { continue };
            if now.kink {
                report.kinks += 1;
                continue;
            }
            vf.drift_into(t, &c.x[..n], &mut b[..n]);
            if now.interior {
                if k + 1 == field.rows() {
                    continue;
                }
                let Some(next) = probe(field, k + 1, c, kink_tol) else { continue };
                if next.kink || !next.interior {
                    continue;
                }
                let mid = t + 0.5 * dt;
                let m = cost.misfit(vf, mid, &c.x[..n], &mut scratch);
                let ham = |g: &Pt| (0..n).map(|a| b[a] * g[a] + 0.5 * g[a] * g[a]).sum::<f64>() - m;
                let vt = (field.value(k + 1, c.node) - field.value(k, c.node)) / dt;
                let r = (vt + 0.5 * (ham(&now.grad) + ham(&next.grad))).abs();
                report.interior_max_residual = report.interior_max_residual.max(r);
            } else if let Some(nrm) = c.normal {
                if k == 0 || now.one_sided[..n].iter().all(Option::is_none) {
                    continue;
                }
                let bn: f64 = (0..n).map(|a| b[a] * nrm[a]).sum();
                let dn: f64 = (0..n).map(|a| now.grad[a] * nrm[a]).sum();
                report.boundary_sub_residual = report.boundary_sub_residual.max((bn + dn).abs());
                report.boundary_super_residual = report.boundary_super_residual.max((bn + 0.5 * dn).abs());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::InitialCost;
    use crate::fields::{Drift, Mat, Observation};
    use crate::paths::ObservationPath;

    fn flat_problem() -> (VectorFieldSpec, StateGrid, CostSpec, TimeGrid) {
        let vf = VectorFieldSpec::scalar(Drift::Constant { value: vec![0.0] }, Observation::Zero { dim: 1 }).unwrap();
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[41]).unwrap();
        let times = TimeGrid::span(0.0, 1.0, 0.01).unwrap();
        let cost = CostSpec::new(InitialCost::Constant { value: 0.7 }, ObservationPath::constant(times, &[0.0]));
        (vf, grid, cost, times)
    }

    #[test]
    fn flat_data_is_a_fixed_point() {
        let (vf, grid, cost, times) = flat_problem();
        for mode in [BoundaryMode::Sub, BoundaryMode::Super] {
            for flux in [Flux::Godunov, Flux::LaxFriedrichs] {
                let f = hjb_solve(&vf, &grid, &cost, &HjbScheme::new(flux, 0.9, mode).unwrap(), times).unwrap();
                assert!(f.values().iter().all(|&v| v == 0.7));
            }
        }
    }

    #[test]
    fn rejects_bad_cfl() {
        assert!(matches!(HjbScheme::new(Flux::Godunov, 1.5, BoundaryMode::Sub), Err(Error::Cfl(_))));
    }

    #[test]
    fn godunov_flux_picks_upwind_side() {
        // H(p) = p^2/2 (q = 0): min over [a, b] containing 0 is 0
        assert_eq!(godunov_1d(0.0, -1.0, 2.0), 0.0);
        assert_eq!(godunov_1d(0.0, 1.0, 2.0), 0.5);
        assert_eq!(godunov_1d(0.0, 2.0, -3.0), 4.5);
    }

    #[test]
    fn steady_kalman_profile() {
        // A = 0, H = 1, P0 = 1 keeps P = 1; with ydot = 0 the estimate is
        // xhat = x0 e^{-t} and V = (x - xhat)^2/2 + int xhat^2/2.
        let vf = VectorFieldSpec::scalar(Drift::Linear { matrix: Mat::from_rows(vec![vec![0.0]]).unwrap(), offset: None }, Observation::Identity { dim: 1 }).unwrap();
        let grid = StateGrid::new(Domain::interval(-2.0, 2.0).unwrap(), &[201]).unwrap();
        let times = TimeGrid::span(0.0, 0.5, 0.005).unwrap();
        let psi = InitialCost::quadratic(vec![0.3], Mat::from_rows(vec![vec![1.0]]).unwrap()).unwrap();
        let cost = CostSpec::new(psi, ObservationPath::constant(times, &[0.0]));
        let f = hjb_solve(&vf, &grid, &cost, &HjbScheme::default_for(1, BoundaryMode::Sub), times).unwrap();
        let t = 0.5f64;
        let xhat = 0.3 * (-t).exp();
        let offset = 0.5 * 0.09 * 0.5 * (1.0 - (-2.0 * t).exp());
        let k = f.rows() - 1;
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.node(i)[0];
            if x.abs() <= 1.0 {
                worst = worst.max((f.value(k, i) - (0.5 * (x - xhat).powi(2) + offset)).abs());
            }
        }
        assert!(worst < 2e-2, "{worst}");
        let r = hjb_residual_report(&f, &vf, &cost).unwrap();
        assert!(r.interior_max_residual < 5e-2, "{r:?}");
    }

    #[test]
    fn comparison_principle() {
        let vf = VectorFieldSpec::scalar(
            Drift::Linear { matrix: Mat::from_rows(vec![vec![-1.0]]).unwrap(), offset: Some(vec![0.5]) },
            Observation::Identity { dim: 1 },
        )
        .unwrap();
        let grid = StateGrid::new(Domain::interval(0.0, 1.0).unwrap(), &[81]).unwrap();
        let times = TimeGrid::span(0.0, 0.5, 0.01).unwrap();
        let obs = ObservationPath::constant(times, &[0.8]);
        let lo = CostSpec::new(InitialCost::quadratic(vec![0.4], Mat::from_rows(vec![vec![0.5]]).unwrap()).unwrap(), obs.clone());
        let hi = CostSpec::new(InitialCost::quadratic(vec![0.4], Mat::from_rows(vec![vec![0.25]]).unwrap()).unwrap(), obs);
        for mode in [BoundaryMode::Sub, BoundaryMode::Super] {
            let s = HjbScheme::default_for(1, mode);
            let a = hjb_solve(&vf, &grid, &lo, &s, times).unwrap();
            let b = hjb_solve(&vf, &grid, &hi, &s, times).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn ball_grid_runs_both_fluxes() {
        let vf = VectorFieldSpec::new(
            Drift::Rotation { rate: 1.0, pull: 0.5, center: vec![0.0, 0.0] },
            crate::fields::Diffusion::Identity { dim: 2 },
            Observation::Identity { dim: 2 },
        )
        .unwrap();
        let grid = StateGrid::new(Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), &[41, 41]).unwrap();
        let times = TimeGrid::span(0.0, 0.2, 0.01).unwrap();
        let psi = InitialCost::quadratic(vec![0.2, 0.0], Mat::identity(2)).unwrap();
        let cost = CostSpec::new(psi, ObservationPath::constant(times, &[0.3, 0.1]));
        let f = hjb_solve(&vf, &grid, &cost, &HjbScheme::default_for(2, BoundaryMode::Sub), times).unwrap();
        assert!(f.row_min(f.rows() - 1).is_some());
    }
}
