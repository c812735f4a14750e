//! Initial cost `psi` and running cost `l = |w|^2/2 + |ydot - h|^2/2`.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fields::{Mat, Polynomial, VectorFieldSpec};
use crate::paths::ObservationPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialCost {
    /// `(x - center)^T P0^{-1} (x - center) / 2`
    Quadratic { center: Vec<f64>, covariance: Mat },
    Constant { value: f64 },
    /// Scalar polynomial (a single component).
    Polynomial(Polynomial),
}

impl InitialCost {
    pub fn quadratic(center: Vec<f64>, covariance: Mat) -> Result<Self> {
        let c = InitialCost::Quadratic { center, covariance };
        c.validate(None)?;
        Ok(c)
    }

    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        match self {
            InitialCost::Quadratic { center, covariance } => {
                let n = center.len();
                if covariance.rows() != n || covariance.cols() != n {
                    return Err(Error::Dimension {
                        what: "initial covariance",
                        expected: n,
                        got: covariance.rows(),
                    });
                }
                let p = covariance.to_nalgebra();
                if (&p - p.transpose()).amax() > 1e-12 * (1.0 + p.amax()) {
                    return Err(Error::param("covariance", "must be symmetric"));
                }
                if p.symmetric_eigenvalues().min() <= 0.0 {
                    return Err(Error::param("covariance", "must be positive definite"));
                }
                if let Some(d) = dim {
                    if d != n {
                        return Err(Error::Dimension {
                            what: "initial cost center",
                            expected: d,
                            got: n,
                        });
                    }
                }
            }
            InitialCost::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::param("psi", "constant must be finite and nonnegative"));
                }
            }
            InitialCost::Polynomial(p) => {
                if p.components.len() != 1 {
                    return Err(Error::param("psi", "polynomial initial cost must be scalar"));
                }
                if let Some(d) = dim {
                    p.check_dim(d)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialCost::Quadratic { center, covariance } => {
                let n = center.len();
                let p = covariance.to_nalgebra();
                let e = nalgebra::DVector::from_iterator(n, x.iter().zip(center).map(|(a, c)| a - c));
                let z = p.cholesky().map(|c| c.solve(&e)).unwrap_or_else(|| e.clone());
                0.5 * e.dot(&z)
            }
            InitialCost::Constant { value } => *value,
            InitialCost::Polynomial(p) => {
                let mut out = [0.0];
                p.eval(x, &mut out);
                out[0]
            }
        }
    }

    /// Lipschitz bound on the bounding box of `domain`.
    pub fn lipschitz(&self, domain: &Domain) -> f64 {
        let (lo, hi) = domain.bounds();
        match self {
            InitialCost::Quadratic { center, covariance } => {
                let inv = covariance.to_nalgebra().try_inverse().unwrap_or_else(|| nalgebra::DMatrix::identity(center.len(), center.len()));
                let reach: f64 = lo
                    .iter()
                    .zip(&hi)
                    .zip(center)
                    .map(|((l, h), c)| {
                        let r = (l - c).abs().max((h - c).abs());
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt();
                inv.norm() * reach
            }
            InitialCost::Constant { .. } => 0.0,
            InitialCost::Polynomial(p) => p.lipschitz(&lo, &hi),
        }
    }
}

/// Initial cost plus the observation path the running cost is bound to.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub psi: InitialCost,
    pub obs: ObservationPath,
}

impl CostSpec {
    pub fn new(psi: InitialCost, obs: ObservationPath) -> Self {
        CostSpec { psi, obs }
    }

    /// `|ydot(t) - h(t, x)|^2 / 2`, with `ydot` read piecewise-constant.
    pub fn misfit(&self, vf: &VectorFieldSpec, t: f64, x: &[f64], scratch: &mut [f64]) -> f64 {
        0.5 * vf.misfit_sq(t, x, self.obs.at(t), scratch)
    }

    /// `l(t, x, w)`.
    pub fn running(&self, vf: &VectorFieldSpec, t: f64, x: &[f64], w: &[f64], scratch: &mut [f64]) -> f64 {
        0.5 * w.iter().map(|v| v * v).sum::<f64>() + self.misfit(vf, t, x, scratch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Drift, Monomial, Observation};
    use crate::paths::TimeGrid;

    #[test]
    fn quadratic_matches_closed_form() {
        let psi = InitialCost::quadratic(vec![0.2], Mat::from_rows(vec![vec![0.5]]).unwrap()).unwrap();
        assert!((psi.eval(&[0.7]) - 0.5 * 0.25 / 0.5).abs() < 1e-15);
        assert_eq!(psi.eval(&[0.2]), 0.0);
        let psi2 = InitialCost::quadratic(vec![0.0, 0.0], Mat::from_rows(vec![vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap()).unwrap();
        assert!((psi2.eval(&[1.0, 1.0]) - 0.5 * (0.5 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        assert!(InitialCost::quadratic(vec![0.0], Mat::from_rows(vec![vec![-1.0]]).unwrap()).is_err());
        assert!(InitialCost::quadratic(vec![0.0, 0.0], Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).is_err());
    }

    #[test]
    fn polynomial_psi() {
        let psi = InitialCost::Polynomial(Polynomial {
            components: vec![vec![Monomial { coef: 3.0, powers: vec![2] }, Monomial { coef: 1.0, powers: vec![0] }]],
        });
        psi.validate(Some(1)).unwrap();
        assert_eq!(psi.eval(&[2.0]), 13.0);
    }

    #[test]
    fn running_cost_is_energy_plus_misfit() {
        let vf = VectorFieldSpec::scalar(Drift::Constant { value: vec![0.0] }, Observation::Identity { dim: 1 }).unwrap();
        let g = TimeGrid::span(0.0, 1.0, 0.1).unwrap();
        let cost = CostSpec::new(InitialCost::Constant { value: 0.0 }, ObservationPath::constant(g, &[0.5]));
        let mut s = [0.0];
        let l = cost.running(&vf, 0.3, &[0.2], &[2.0], &mut s);
        assert!((l - (2.0 + 0.5 * 0.09)).abs() < 1e-15);
    }
}
