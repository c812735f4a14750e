//! Linear unconstrained reference: Riccati flow, Kalman–Bucy estimator and
//! the quadratic cost-to-come they induce.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::InitialCost;
use crate::error::{Error, Result};
use crate::fields::{Drift, Mat, Observation, VectorFieldSpec};
use crate::paths::{ObservationPath, TimeGrid};

/// `dx = (A x + c) dt + Sigma dw`, `dy = (H x + d) dt + dv`, `x(0) ~ (x0, P0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: Mat,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    pub sigma: Mat,
    pub h: Mat,
    #[serde(default)]
    pub d: Option<Vec<f64>>,
    pub p0: Mat,
    pub x0: Vec<f64>,
}

impl LinearModel {
    pub fn new(a: Mat, sigma: Mat, h: Mat, p0: Mat, x0: Vec<f64>) -> Result<Self> {
        let m = LinearModel {
            a,
            c: None,
            sigma,
            h,
            d: None,
            p0,
            x0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Reads a linear model off a scenario whose drift and observation are
    /// affine and whose initial cost is quadratic.
    pub fn from_spec(vf: &VectorFieldSpec, psi: &InitialCost) -> Result<Self> {
        let n = vf.state_dim();
        let (a, c) = match &vf.drift {
            Drift::Linear { matrix, offset } => (matrix.clone(), offset.clone()),
            Drift::Constant { value } => (zeros(n, n), Some(value.clone())),
            _ => return Err(Error::param("drift", "the Kalman reference needs an affine drift")),
        };
        let (h, d) = match &vf.observation {
            Observation::Identity { dim } => (Mat::identity(*dim), None),
            Observation::Linear { matrix, offset } => (matrix.clone(), offset.clone()),
            Observation::Zero { dim } => (zeros(*dim, n), None),
            Observation::Polynomial(_) => return Err(Error::param("observation", "the Kalman reference needs an affine observation")),
        };
        let InitialCost::Quadratic { center, covariance } = psi else {
            return Err(Error::param("psi", "the Kalman reference needs a quadratic initial cost"));
        };
        let m = LinearModel {
            a,
            c,
            sigma: vf.sigma_matrix(),
            h,
            d,
            p0: covariance.clone(),
            x0: center.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x0.len();
        let check = |what: &'static str, got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(Error::Dimension { what, expected: n, got })
            }
        };
        check("A rows", self.a.rows())?;
        check("A columns", self.a.cols())?;
        check("Sigma rows", self.sigma.rows())?;
        check("H columns", self.h.cols())?;
        if let Some(c) = &self.c {
            check("drift offset", c.len())?;
        }
        if let Some(d) = &self.d {
            if d.len() != self.h.rows() {
                return Err(Error::Dimension {
                    what: "observation offset",
                    expected: self.h.rows(),
                    got: d.len(),
                });
            }
        }
        InitialCost::Quadratic {
            center: self.x0.clone(),
            covariance: self.p0.clone(),
        }
        .validate(Some(n))
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.h.rows()
    }

    fn drift(&self, a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
        let mut v = a * x;
        if let Some(c) = &self.c {
            v += DVector::from_column_slice(c);
        }
        v
    }

    fn innovation(&self, h: &DMatrix<f64>, ydot: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::from_column_slice(ydot) - h * x;
        if let Some(d) = &self.d {
            r -= DVector::from_column_slice(d);
        }
        r
    }
}

fn zeros(r: usize, c: usize) -> Mat {
    Mat::from_rows(vec![vec![0.0; c]; r]).expect("rectangular")
}

struct Coefficients {
    a: DMatrix<f64>,
    q: DMatrix<f64>,
    h: DMatrix<f64>,
    hth: DMatrix<f64>,
}

impl Coefficients {
    fn of(m: &LinearModel) -> Self {
        let a = m.a.to_nalgebra();
        let s = m.sigma.to_nalgebra();
        let h = m.h.to_nalgebra();
        Coefficients {
            q: &s * s.transpose(),
            hth: h.transpose() * &h,
            a,
            h,
        }
    }

    /// `A P + P A^T + Sigma Sigma^T - P H^T H P`
    fn riccati(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * p + p * self.a.transpose() + &self.q - p * &self.hth * p
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

fn check_pd(p: &DMatrix<f64>, step: usize) -> Result<()> {
    if p.iter().all(|v| v.is_finite()) && p.clone().cholesky().is_some() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(step))
    }
}

/// `P(t_k)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    pub times: TimeGrid,
    p: Vec<DMatrix<f64>>,
}

impl RiccatiPath {
    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        &self.p[k]
    }

    pub fn last(&self) -> &DMatrix<f64> {
        &self.p[self.p.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// RK4 integration of the Riccati equation on `[0, t_end]`.
pub fn riccati_solve(model: &LinearModel, t_end: f64, dt: f64) -> Result<RiccatiPath> {
    model.validate()?;
    let times = TimeGrid::span(0.0, t_end, dt)?;
    let co = Coefficients::of(model);
    let mut p = model.p0.to_nalgebra();
    let mut out = Vec::with_capacity(times.steps + 1);
    out.push(p.clone());
    for k in 0..times.steps {
        let k1 = co.riccati(&p);
        let k2 = co.riccati(&(&p + &k1 * (0.5 * dt)));
        let k3 = co.riccati(&(&p + &k2 * (0.5 * dt)));
        let k4 = co.riccati(&(&p + &k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        symmetrize(&mut p);
        check_pd(&p, k + 1)?;
        out.push(p.clone());
    }
    Ok(RiccatiPath { times, p: out })
}

/// Estimator path, covariance and accumulated innovation energy.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanPath {
    pub times: TimeGrid,
    pub riccati: RiccatiPath,
    xhat: Vec<DVector<f64>>,
    /// `int_0^{t_k} |ydot - H xhat|^2 / 2`, trapezoid on the grid.
    misfit: Vec<f64>,
}

impl KalmanPath {
    pub fn estimate(&self, k: usize) -> &[f64] {
        self.xhat[k].as_slice()
    }

    pub fn misfit_integral(&self, k: usize) -> f64 {
        self.misfit[k]
    }

    /// Grid index of time `t`, which must be a grid node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let r = (t - self.times.t0) / self.times.dt;
        let k = r.round();
        if k < 0.0 || k as usize > self.times.steps || (r - k).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!("t = {t} is not a node of the Kalman grid")));
        }
        Ok(k as usize)
    }

    /// `(x - xhat)^T P^{-1} (x - xhat) / 2 + int_0^t |ydot - H xhat|^2 / 2`.
    pub fn cost_to_come(&self, k: usize, x: &[f64]) -> Result<f64> {
        let p = self.riccati.at(k);
        let e = DVector::from_column_slice(x) - &self.xhat[k];
        let chol = p.clone().cholesky().ok_or(Error::Singular(self.times.t(k)))?;
        Ok(0.5 * e.dot(&chol.solve(&e)) + self.misfit[k])
    }
}

/// Joint RK4 integration of `P` and `dxhat = A xhat + c + P H^T (ydot - H xhat - d)`
/// with `ydot` frozen over each observation interval.
pub fn kalman_estimate(model: &LinearModel, obs: &ObservationPath, dt: f64) -> Result<KalmanPath> {
    model.validate()?;
    if obs.dim != model.obs_dim() {
        return Err(Error::Dimension {
            what: "observation path",
            expected: model.obs_dim(),
            got: obs.dim,
        });
    }
    obs.check_step(dt)?;
    let times = TimeGrid::span(obs.grid.t0, obs.grid.t_end(), dt)?;
    let co = Coefficients::of(model);
    let gain_rhs = |p: &DMatrix<f64>, x: &DVector<f64>, ydot: &[f64]| -> DVector<f64> {
        model.drift(&co.a, x) + p * co.h.transpose() * model.innovation(&co.h, ydot, x)
    };
    let energy = |x: &DVector<f64>, ydot: &[f64]| 0.5 * model.innovation(&co.h, ydot, x).norm_squared();

    let mut p = model.p0.to_nalgebra();
    let mut x = DVector::from_column_slice(&model.x0);
    let mut ps = vec![p.clone()];
    let mut xs = vec![x.clone()];
    let mut misfit = vec![0.0];
    for k in 0..times.steps {
        let ydot = obs.at(times.t(k) + 0.5 * dt);
        let (pk1, xk1) = (co.riccati(&p), gain_rhs(&p, &x, ydot));
        let (p2, x2) = (&p + &pk1 * (0.5 * dt), &x + &xk1 * (0.5 * dt));
        let (pk2, xk2) = (co.riccati(&p2), gain_rhs(&p2, &x2, ydot));
        let (p3, x3) = (&p + &pk2 * (0.5 * dt), &x + &xk2 * (0.5 * dt));
        let (pk3, xk3) = (co.riccati(&p3), gain_rhs(&p3, &x3, ydot));
        let (p4, x4) = (&p + &pk3 * dt, &x + &xk3 * dt);
        let (pk4, xk4) = (co.riccati(&p4), gain_rhs(&p4, &x4, ydot));
        let x_next = &x + (xk1 + xk2 * 2.0 + xk3 * 2.0 + xk4) * (dt / 6.0);
        p += (pk1 + pk2 * 2.0 + pk3 * 2.0 + pk4) * (dt / 6.0);
        symmetrize(&mut p);
        check_pd(&p, k + 1)?;
        let m = misfit[k] + 0.5 * dt * (energy(&x, ydot) + energy(&x_next, ydot));
        x = x_next;
        ps.push(p.clone());
        xs.push(x.clone());
        misfit.push(m);
    }
    Ok(KalmanPath {
        times,
        riccati: RiccatiPath { times, p: ps },
        xhat: xs,
        misfit,
    })
}

/// Cost-to-come of the linear problem at `(t, x)`; `t` must be a node of
/// the `dt` grid.
pub fn kalman_cost_to_come(model: &LinearModel, obs: &ObservationPath, dt: f64, t: f64, x: &[f64]) -> Result<f64> {
    let path = kalman_estimate(model, obs, dt)?;
    path.cost_to_come(path.index_of(t)?, x)
}
