//! Time grids and the sampled paths that live on them.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Uniform grid `t_k = t0 + k * dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::param("steps", "time grid needs at least one step"));
        }
        Ok(TimeGrid { t0, dt, steps })
    }

    /// Grid covering `[t0, t1]`; `dt` must divide the span.
    pub fn span(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let len = t1 - t0;
        let steps = (len / dt).round();
        if steps < 1.0 || (steps * dt - len).abs() > 1e-9 * len.abs().max(dt) {
            return Err(Error::param("dt", format!("{dt} does not divide [{t0}, {t1}]")));
        }
        Self::new(t0, dt, steps as usize)
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.steps)
    }

    /// Index of the interval `[t_k, t_{k+1})` containing `t`, clamped.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt + 1e-9).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.steps - 1)
        }
    }

    /// Same grid refined by an integer factor.
    pub fn refine(&self, factor: usize) -> Self {
        TimeGrid {
            t0: self.t0,
            dt: self.dt / factor as f64,
            steps: self.steps * factor,
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }
}

/// Piecewise-constant disturbance `w_k` on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbancePath {
    pub grid: TimeGrid,
    pub dim: usize,
    samples: Vec<f64>,
}

impl DisturbancePath {
    pub fn new(grid: TimeGrid, dim: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.steps * dim {
            return Err(Error::Dimension {
                what: "disturbance samples",
                expected: grid.steps * dim,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("disturbance", "samples must be finite"));
        }
        Ok(DisturbancePath { grid, dim, samples })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        DisturbancePath {
            grid,
            dim,
            samples: vec![0.0; grid.steps * dim],
        }
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        let samples = (0..grid.steps).flat_map(|_| value.iter().copied()).collect();
        DisturbancePath {
            grid,
            dim: value.len(),
            samples,
        }
    }

    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.steps * dim);
        for k in 0..grid.steps {
            let v = f(grid.t(k));
            if v.len() != dim {
                return Err(Error::Dimension {
                    what: "disturbance sample",
                    expected: dim,
                    got: v.len(),
                });
            }
            samples.extend(v);
        }
        Self::new(grid, dim, samples)
    }

    /// Gaussian white disturbance with standard deviation `std`, held
    /// constant over blocks of `hold` steps.
    pub fn gaussian(grid: TimeGrid, dim: usize, std: f64, hold: usize, seed: u64, stream: u64) -> Self {
        let mut rng = rng::stream(seed, stream);
        let hold = hold.max(1);
        let mut samples = Vec::with_capacity(grid.steps * dim);
        let mut current = vec![0.0; dim];
        for k in 0..grid.steps {
            if k % hold == 0 {
                for c in current.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c = std * z;
                }
            }
            samples.extend_from_slice(&current);
        }
        DisturbancePath { grid, dim, samples }
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn at(&self, t: f64) -> &[f64] {
        self.sample(self.grid.interval_of(t))
    }

    /// `||w||_{L^2}`, exact for piecewise-constant paths.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dt * self.samples.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// The same function sampled on a grid refined by `factor`.
    pub fn refine(&self, factor: usize) -> Self {
        let grid = self.grid.refine(factor);
        let mut samples = Vec::with_capacity(self.samples.len() * factor);
        for k in 0..self.grid.steps {
            for _ in 0..factor {
                samples.extend_from_slice(self.sample(k));
            }
        }
        DisturbancePath {
            grid,
            dim: self.dim,
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntegratorTag {
    Reflected,
    Penalized { kappa: f64 },
    Sde { epsilon: f64, seed: u64 },
}

/// States `x_k` at every grid node plus the disturbance that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub dim: usize,
    states: Vec<f64>,
    pub disturbance: DisturbancePath,
    pub tag: IntegratorTag,
}

impl Trajectory {
    pub(crate) fn from_parts(dim: usize, states: Vec<f64>, disturbance: DisturbancePath, tag: IntegratorTag) -> Self {
        debug_assert_eq!(states.len(), (disturbance.grid.steps + 1) * dim);
        Trajectory {
            grid: disturbance.grid,
            dim,
            states,
            disturbance,
            tag,
        }
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }

    pub fn len(&self) -> usize {
        self.grid.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `max_k |x_k - y_k|` against a trajectory on the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if !self.grid.same_as(&other.grid) || self.dim != other.dim {
            return Err(Error::GridMismatch("trajectories live on different grids".into()));
        }
        Ok(self
            .states()
            .zip(other.states())
            .map(|(a, b)| crate::domain::dist(a, b))
            .fold(0.0, f64::max))
    }

    /// Keeps every `factor`-th node, mapping a refined run back to a
    /// coarser grid.
    pub fn subsample(&self, factor: usize) -> Result<Trajectory> {
        if factor == 0 || self.grid.steps % factor != 0 {
            return Err(Error::param("factor", "must divide the number of steps"));
        }
        let grid = TimeGrid::new(self.grid.t0, self.grid.dt * factor as f64, self.grid.steps / factor)?;
        let states = (0..=grid.steps)
            .flat_map(|k| self.state(k * factor).to_vec())
            .collect();
        let w = (0..grid.steps)
            .flat_map(|k| self.disturbance.sample(k * factor).to_vec())
            .collect();
        Ok(Trajectory {
            grid,
            dim: self.dim,
            states,
            disturbance: DisturbancePath::new(grid, self.disturbance.dim, w)?,
            tag: self.tag,
        })
    }
}

/// Observation derivative `ydot_k` at every grid node, read as
/// piecewise-constant on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPath {
    pub grid: TimeGrid,
    pub dim: usize,
    ydot: Vec<f64>,
}

impl ObservationPath {
    pub fn new(grid: TimeGrid, dim: usize, ydot: Vec<f64>) -> Result<Self> {
        if ydot.len() != (grid.steps + 1) * dim {
            return Err(Error::Dimension {
                what: "observation samples",
                expected: (grid.steps + 1) * dim,
                got: ydot.len(),
            });
        }
        if ydot.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("ydot", "samples must be finite"));
        }
        Ok(ObservationPath { grid, dim, ydot })
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        ObservationPath {
            grid,
            dim: value.len(),
            ydot: (0..=grid.steps).flat_map(|_| value.iter().copied()).collect(),
        }
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.ydot[k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.ydot.chunks(self.dim)
    }

    /// Piecewise-constant value at time `t`.
    pub fn at(&self, t: f64) -> &[f64] {
        self.sample(self.grid.interval_of(t))
    }

    /// Checks that a solver step `dt` hits every observation node.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        let ratio = self.grid.dt / dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "solver step {dt} does not divide the observation step {}",
                self.grid.dt
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_requires_divisible_step() {
        assert_eq!(TimeGrid::span(0.0, 1.0, 0.01).unwrap().steps, 100);
        assert!(TimeGrid::span(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::span(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::span(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn interval_lookup_is_piecewise_constant() {
        let g = TimeGrid::span(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.interval_of(0.0), 0);
        assert_eq!(g.interval_of(0.1), 1);
        assert_eq!(g.interval_of(0.3 - 1e-15), 3);
        assert_eq!(g.interval_of(1.0), 9);
        assert_eq!(g.interval_of(7.0), 9);
    }

    #[test]
    fn l2_norm_is_exact() {
        let g = TimeGrid::span(0.0, 2.0, 0.5).unwrap();
        let w = DisturbancePath::new(g, 1, vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        assert!((w.l2_norm() - (0.5f64 * 6.0).sqrt()).abs() < 1e-15);
        let fine = w.refine(4);
        assert!((fine.l2_norm() - w.l2_norm()).abs() < 1e-14);
        assert_eq!(fine.at(1.1), &[2.0]);
    }

    #[test]
    fn gaussian_path_is_reproducible() {
        let g = TimeGrid::span(0.0, 1.0, 0.01).unwrap();
        let a = DisturbancePath::gaussian(g, 2, 1.0, 5, 42, 3);
        let b = DisturbancePath::gaussian(g, 2, 1.0, 5, 42, 3);
        let c = DisturbancePath::gaussian(g, 2, 1.0, 5, 42, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.sample(0), a.sample(4));
        assert_ne!(a.sample(4), a.sample(5));
    }

    #[test]
    fn observation_step_check() {
        let g = TimeGrid::span(0.0, 1.0, 0.01).unwrap();
        let obs = ObservationPath::constant(g, &[0.5]);
        assert!(obs.check_step(0.001).is_ok());
        assert!(obs.check_step(0.01).is_ok());
        assert!(obs.check_step(0.003).is_err());
        assert!(obs.check_step(0.02).is_err());
    }
}
