//! Integrators for the reflected, penalized and stochastic dynamics, and the
//! twin-experiment observation generator.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fields::VectorFieldSpec;
use crate::paths::{DisturbancePath, IntegratorTag, ObservationPath, TimeGrid, Trajectory};
use crate::rng;

/// Largest `dt_eff * kappa` allowed in penalized runs.
pub const PENALTY_STEP_LIMIT: f64 = 0.5;

fn check_inputs(vf: &VectorFieldSpec, x0: &[f64], w: &DisturbancePath) -> Result<()> {
    if x0.len() != vf.state_dim() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: vf.state_dim(),
            got: x0.len(),
        });
    }
    if w.dim != vf.noise_dim() {
        return Err(Error::Dimension {
            what: "disturbance",
            expected: vf.noise_dim(),
            got: w.dim,
        });
    }
    if !(w.grid.dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    Ok(())
}

/// Projected explicit Euler scheme `x_{k+1} = P(x_k + dt (b + sigma w_k))`.
pub fn integrate_reflected(vf: &VectorFieldSpec, domain: &Domain, x0: &[f64], w: &DisturbancePath) -> Result<Trajectory> {
    integrate_reflected_substeps(vf, domain, x0, w, 1)
}

/// Projected Euler with `substeps` inner steps per disturbance interval.
pub fn integrate_reflected_substeps(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    w: &DisturbancePath,
    substeps: usize,
) -> Result<Trajectory> {
    check_inputs(vf, x0, w)?;
    let d0 = domain.dist(x0);
    if d0 > domain.tol_boundary() {
        return Err(Error::OutsideDomain(d0));
    }
    let n = x0.len();
    let m = substeps.max(1);
    let h = w.grid.dt / m as f64;
    let mut x = domain.project(x0);
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut states = Vec::with_capacity((w.grid.steps + 1) * n);
    states.extend_from_slice(&x);
    for k in 0..w.grid.steps {
        let wk = w.sample(k);
        for j in 0..m {
            let t = w.grid.t(k) + j as f64 * h;
            vf.velocity_into(t, &x, wk, &mut v);
            for i in 0..n {
                y[i] = x[i] + h * v[i];
            }
            domain.project_into(&y, &mut x);
        }
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::from_parts(n, states, w.clone(), IntegratorTag::Reflected))
}

/// Number of inner steps keeping `dt_eff * kappa <= 0.5`.
pub fn penalty_substeps(dt: f64, kappa: f64) -> usize {
    ((dt * kappa / PENALTY_STEP_LIMIT).ceil() as usize).max(1)
}

/// Explicit Euler on `x' = b + sigma w - kappa (x - P(x))`.
pub fn integrate_penalized(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    w: &DisturbancePath,
    kappa: f64,
) -> Result<Trajectory> {
    integrate_penalized_substeps(vf, domain, x0, w, kappa, 1)
}

/// Penalized Euler with at least `min_substeps` inner steps per interval.
pub fn integrate_penalized_substeps(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    w: &DisturbancePath,
    kappa: f64,
    min_substeps: usize,
) -> Result<Trajectory> {
    check_inputs(vf, x0, w)?;
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
    }
    let n = x0.len();
    let m = penalty_substeps(w.grid.dt, kappa).max(min_substeps);
    let h = w.grid.dt / m as f64;
    let mut x = x0.to_vec();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut states = Vec::with_capacity((w.grid.steps + 1) * n);
    states.extend_from_slice(&x);
    for k in 0..w.grid.steps {
        let wk = w.sample(k);
        for j in 0..m {
            let t = w.grid.t(k) + j as f64 * h;
            vf.velocity_into(t, &x, wk, &mut v);
            domain.project_into(&x, &mut p);
            for i in 0..n {
                x[i] += h * (v[i] - kappa * (x[i] - p[i]));
            }
        }
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::from_parts(n, states, w.clone(), IntegratorTag::Penalized { kappa }))
}

/// Projected Euler–Maruyama for `dX = b dt + sqrt(eps) sigma dB`, reflected
/// at the boundary.
///
/// The Brownian increments are recorded as the equivalent piecewise-constant
/// disturbance `w_k = sqrt(eps / dt) xi_k`.
pub fn integrate_reflected_sde(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    epsilon: f64,
    seed: u64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    reflected_sde_path(vf, domain, x0, epsilon, seed, 0, grid)
}

fn reflected_sde_path(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    epsilon: f64,
    seed: u64,
    stream: u64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::param("epsilon", format!("must be nonnegative, got {epsilon}")));
    }
    let n = vf.state_dim();
    let r = vf.noise_dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    let d0 = domain.dist(x0);
    if d0 > domain.tol_boundary() {
        return Err(Error::OutsideDomain(d0));
    }
    let mut rng = rng::stream(seed, stream);
    let dt = grid.dt;
    let scale = (epsilon * dt).sqrt();
    let mut x = domain.project(x0);
    let mut b = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut xi = vec![0.0; r];
    let mut ws = Vec::with_capacity(grid.steps * r);
    let mut states = Vec::with_capacity((grid.steps + 1) * n);
    states.extend_from_slice(&x);
    for k in 0..grid.steps {
        let t = grid.t(k);
        for z in xi.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        vf.drift_into(t, &x, &mut b);
        noise.iter_mut().for_each(|v| *v = 0.0);
        vf.add_sigma_times(t, &x, &xi, &mut noise);
        for i in 0..n {
            y[i] = x[i] + dt * b[i] + scale * noise[i];
        }
        domain.project_into(&y, &mut x);
        states.extend_from_slice(&x);
        ws.extend(xi.iter().map(|z| scale / dt * z));
    }
    let w = DisturbancePath::new(grid, r, ws)?;
    Ok(Trajectory::from_parts(n, states, w, IntegratorTag::Sde { epsilon, seed }))
}

/// Terminal states of `paths` independent reflected SDE runs; path `i` uses
/// stream `i` of `seed`.
pub fn reflected_sde_terminal_states(
    vf: &VectorFieldSpec,
    domain: &Domain,
    x0: &[f64],
    epsilon: f64,
    seed: u64,
    grid: TimeGrid,
    paths: usize,
) -> Result<Vec<Vec<f64>>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let tr = reflected_sde_path(vf, domain, x0, epsilon, seed, i, grid)?;
            Ok(tr.state(grid.steps).to_vec())
        })
        .collect()
}

/// `ydot_k = h(t_k, x_k) + nu_k`; the last node reuses the final noise
/// sample, matching the piecewise-constant reading of `nu`.
pub fn synthesize_observation(traj: &Trajectory, vf: &VectorFieldSpec, noise: &DisturbancePath) -> Result<ObservationPath> {
    if !traj.grid.same_as(&noise.grid) {
        return Err(Error::GridMismatch("observation noise and trajectory grids differ".into()));
    }
    let m = vf.obs_dim();
    if noise.dim != m {
        return Err(Error::Dimension {
            what: "observation noise",
            expected: m,
            got: noise.dim,
        });
    }
    let mut ydot = Vec::with_capacity(traj.len() * m);
    let mut h = vec![0.0; m];
    for k in 0..traj.len() {
        vf.observe_into(traj.grid.t(k), traj.state(k), &mut h);
        let nu = noise.sample(k.min(traj.grid.steps - 1));
        ydot.extend(h.iter().zip(nu).map(|(a, b)| a + b));
    }
    ObservationPath::new(traj.grid, m, ydot)
}

/// `max_k dist(x_k, G)`.
pub fn max_dist_to_domain(traj: &Trajectory, domain: &Domain) -> f64 {
    traj.states().map(|x| domain.dist(x)).fold(0.0, f64::max)
}

/// `max_{r != s} |x(r) - x(s)| / |r - s|^{1/2}` over all grid pairs.
pub fn holder_quotient(traj: &Trajectory) -> f64 {
    let n = traj.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = traj.state(i);
            let mut best: f64 = 0.0;
            for j in i + 1..n {
                let dtau = (j - i) as f64 * traj.grid.dt;
                best = best.max(crate::domain::dist(xi, traj.state(j)) / dtau.sqrt());
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}
