//! Catalog of drift, diffusion and observation maps.
//!
//! Every entry is Lipschitz on bounded sets and carries a closed-form bound
//! for its Lipschitz constant on a given domain.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Dense row-major matrix used for the small linear maps of the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::param("matrix", "rows must be nonempty and of equal length"));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Mat { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// `out = self * x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Mat {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Mat::from_rows(rows)
    }
}

impl From<Mat> for Vec<Vec<f64>> {
    fn from(m: Mat) -> Self {
        m.to_rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Vector-valued polynomial: one list of monomials per output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub components: Vec<Vec<Monomial>>,
}

impl Polynomial {
    pub(crate) fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, terms) in out.iter_mut().zip(&self.components) {
            *o = terms
                .iter()
                .map(|m| m.coef * m.powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
                .sum();
        }
    }

    /// Frobenius bound of the Jacobian over the box `[lo, hi]`.
    pub(crate) fn lipschitz(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let amax: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l.abs().max(h.abs())).collect();
        let mut sq = 0.0;
        for terms in &self.components {
            for j in 0..amax.len() {
                let d: f64 = terms
                    .iter()
                    .filter(|m| m.powers.get(j).copied().unwrap_or(0) > 0)
                    .map(|m| {
                        let mut v = m.coef.abs() * f64::from(m.powers[j]);
                        for (k, &p) in m.powers.iter().enumerate() {
                            let e = if k == j { p as i32 - 1 } else { p as i32 };
                            v *= amax[k].powi(e);
                        }
                        v
                    })
                    .sum();
                sq += d * d;
            }
        }
        sq.sqrt()
    }

    pub(crate) fn check_dim(&self, input: usize) -> Result<()> {
        for terms in &self.components {
            if terms.iter().any(|m| m.powers.len() != input) {
                return Err(Error::Dimension {
                    what: "polynomial exponent vector",
                    expected: input,
                    got: terms.iter().map(|m| m.powers.len()).find(|&l| l != input).unwrap_or(0),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Drift {
    Constant {
        value: Vec<f64>,
    },
    /// `b(x) = A x + c`
    Linear {
        matrix: Mat,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    /// Planar rigid rotation about `center` plus a linear pull toward it.
    Rotation {
        rate: f64,
        #[serde(default)]
        pull: f64,
        center: Vec<f64>,
    },
    /// `strength * (x - c) / max(|x - c|, core)`: outward for positive
    /// strength, inward for negative.
    Radial {
        strength: f64,
        center: Vec<f64>,
        #[serde(default = "default_core")]
        core: f64,
    },
    Polynomial(Polynomial),
}

fn default_core() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Diffusion {
    Identity { dim: usize },
    Scalar { dim: usize, value: f64 },
    Constant { matrix: Mat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Observation {
    /// `h(x) = x`
    Identity { dim: usize },
    /// `h(x) = H x + c`
    Linear {
        matrix: Mat,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    /// `h(x) = 0` in `R^dim`.
    Zero { dim: usize },
    Polynomial(Polynomial),
}

/// Drift `b`, diffusion `sigma` and observation map `h` of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldSpec {
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub observation: Observation,
}

impl VectorFieldSpec {
    pub fn new(drift: Drift, diffusion: Diffusion, observation: Observation) -> Result<Self> {
        let vf = VectorFieldSpec {
            drift,
            diffusion,
            observation,
        };
        vf.validate()?;
        Ok(vf)
    }

    /// One-dimensional shorthand with unit diffusion.
    pub fn scalar(drift: Drift, observation: Observation) -> Result<Self> {
        Self::new(drift, Diffusion::Identity { dim: 1 }, observation)
    }

    pub fn state_dim(&self) -> usize {
        match &self.diffusion {
            Diffusion::Identity { dim } | Diffusion::Scalar { dim, .. } => *dim,
            Diffusion::Constant { matrix } => matrix.rows(),
        }
    }

    pub fn noise_dim(&self) -> usize {
        match &self.diffusion {
            Diffusion::Identity { dim } | Diffusion::Scalar { dim, .. } => *dim,
            Diffusion::Constant { matrix } => matrix.cols(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match &self.observation {
            Observation::Identity { dim } | Observation::Zero { dim } => *dim,
            Observation::Linear { matrix, .. } => matrix.rows(),
            Observation::Polynomial(p) => p.components.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        if n == 0 {
            return Err(Error::param("diffusion", "state dimension must be positive"));
        }
        let check = |what: &'static str, got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(Error::Dimension { what, expected: n, got })
            }
        };
        match &self.drift {
            Drift::Constant { value } => check("constant drift", value.len())?,
            Drift::Linear { matrix, offset } => {
                check("drift matrix rows", matrix.rows())?;
                check("drift matrix cols", matrix.cols())?;
                if let Some(c) = offset {
                    check("drift offset", c.len())?;
                }
            }
            Drift::Rotation { center, .. } => {
                check("rotation center", center.len())?;
                if n != 2 {
                    return Err(Error::param("drift", "rotation is planar (dimension 2)"));
                }
            }
            Drift::Radial { center, core, .. } => {
                check("radial center", center.len())?;
                if *core <= 0.0 {
                    return Err(Error::param("core", "must be positive"));
                }
            }
            Drift::Polynomial(p) => {
                check("polynomial drift components", p.components.len())?;
                p.check_dim(n)?;
            }
        }
        match &self.observation {
            Observation::Identity { dim } => check("identity observation", *dim)?,
            Observation::Linear { matrix, offset } => {
                check("observation matrix cols", matrix.cols())?;
                if let Some(c) = offset {
                    if c.len() != matrix.rows() {
                        return Err(Error::Dimension {
                            what: "observation offset",
                            expected: matrix.rows(),
                            got: c.len(),
                        });
                    }
                }
            }
            Observation::Zero { dim } => {
                if *dim == 0 {
                    return Err(Error::param("observation", "dimension must be positive"));
                }
            }
            Observation::Polynomial(p) => p.check_dim(n)?,
        }
        Ok(())
    }

    pub fn drift_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            Drift::Constant { value } => out.copy_from_slice(value),
            Drift::Linear { matrix, offset } => {
                matrix.apply(x, out);
                if let Some(c) = offset {
                    out.iter_mut().zip(c).for_each(|(o, ci)| *o += ci);
                }
            }
            Drift::Rotation { rate, pull, center } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                out[0] = -rate * dy - pull * dx;
                out[1] = rate * dx - pull * dy;
            }
            Drift::Radial { strength, center, core } => {
                let r = crate::domain::dist(x, center).max(*core);
                for i in 0..x.len() {
                    out[i] = strength * (x[i] - center[i]) / r;
                }
            }
            Drift::Polynomial(p) => p.eval(x, out),
        }
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        self.drift_into(t, x, &mut out);
        out
    }

    /// Adds `sigma(t, x) * w` to `out`.
    pub fn add_sigma_times(&self, _t: f64, _x: &[f64], w: &[f64], out: &mut [f64]) {
        match &self.diffusion {
            Diffusion::Identity { .. } => out.iter_mut().zip(w).for_each(|(o, wi)| *o += wi),
            Diffusion::Scalar { value, .. } => out.iter_mut().zip(w).for_each(|(o, wi)| *o += value * wi),
            Diffusion::Constant { matrix } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += (0..matrix.cols()).map(|j| matrix.get(i, j) * w[j]).sum::<f64>();
                }
            }
        }
    }

    /// Velocity `b(t, x) + sigma(t, x) w`.
    pub fn velocity_into(&self, t: f64, x: &[f64], w: &[f64], out: &mut [f64]) {
        self.drift_into(t, x, out);
        self.add_sigma_times(t, x, w, out);
    }

    pub fn sigma_matrix(&self) -> Mat {
        match &self.diffusion {
            Diffusion::Identity { dim } => Mat::identity(*dim),
            Diffusion::Scalar { dim, value } => {
                let mut m = Mat::identity(*dim);
                m.data.iter_mut().for_each(|v| *v *= value);
                m
            }
            Diffusion::Constant { matrix } => matrix.clone(),
        }
    }

    /// `true` when `sigma` is the identity, the standing assumption of the
    /// grid solvers.
    pub fn sigma_is_identity(&self) -> bool {
        match &self.diffusion {
            Diffusion::Identity { .. } => true,
            Diffusion::Scalar { value, .. } => *value == 1.0,
            Diffusion::Constant { matrix } => *matrix == Mat::identity(matrix.rows()),
        }
    }

    pub fn observe_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.observation {
            Observation::Identity { .. } => out.copy_from_slice(x),
            Observation::Linear { matrix, offset } => {
                matrix.apply(x, out);
                if let Some(c) = offset {
                    out.iter_mut().zip(c).for_each(|(o, ci)| *o += ci);
                }
            }
            Observation::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Observation::Polynomial(p) => p.eval(x, out),
        }
    }

    pub fn observe(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim()];
        self.observe_into(t, x, &mut out);
        out
    }

    /// `|ydot - h(t, x)|^2`, using `scratch` (length `obs_dim`) for `h`.
    pub fn misfit_sq(&self, t: f64, x: &[f64], ydot: &[f64], scratch: &mut [f64]) -> f64 {
        self.observe_into(t, x, scratch);
        scratch.iter().zip(ydot).map(|(h, y)| (y - h) * (y - h)).sum()
    }

    /// Lipschitz bound of the drift on the bounding box of `domain`.
    pub fn drift_lipschitz(&self, domain: &Domain) -> f64 {
        match &self.drift {
            Drift::Constant { .. } => 0.0,
            Drift::Linear { matrix, .. } => matrix.frobenius(),
            Drift::Rotation { rate, pull, .. } => rate.abs() + pull.abs(),
            Drift::Radial { strength, core, .. } => 2.0 * strength.abs() / core,
            Drift::Polynomial(p) => {
                let (lo, hi) = domain.bounds();
                p.lipschitz(&lo, &hi)
            }
        }
    }

    pub fn observation_lipschitz(&self, domain: &Domain) -> f64 {
        match &self.observation {
            Observation::Identity { .. } => 1.0,
            Observation::Linear { matrix, .. } => matrix.frobenius(),
            Observation::Zero { .. } => 0.0,
            Observation::Polynomial(p) => {
                let (lo, hi) = domain.bounds();
                p.lipschitz(&lo, &hi)
            }
        }
    }

    /// Smallest eigenvalue of `sigma^T sigma`.
    pub fn gamma0(&self) -> f64 {
        let s = self.sigma_matrix().to_nalgebra();
        let sts = s.transpose() * &s;
        sts.symmetric_eigenvalues().min()
    }

    /// Largest drift magnitude over a sample of the domain's bounding box.
    pub fn max_drift(&self, domain: &Domain, per_axis: usize) -> f64 {
        let (lo, hi) = domain.bounds();
        let n = lo.len();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(n as u32);
        let mut x = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut best: f64 = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            for i in 0..n {
                let k = rem % per_axis;
                rem /= per_axis;
                x[i] = lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64;
            }
            let mut p = vec![0.0; n];
            domain.project_into(&x, &mut p);
            self.drift_into(0.0, &p, &mut b);
            best = best.max(crate::domain::norm(&b));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attract() -> VectorFieldSpec {
        VectorFieldSpec::scalar(
            Drift::Linear {
                matrix: Mat::from_rows(vec![vec![-1.0]]).unwrap(),
                offset: Some(vec![0.5]),
            },
            Observation::Identity { dim: 1 },
        )
        .unwrap()
    }

    #[test]
    fn linear_drift_with_offset() {
        let vf = attract();
        assert_eq!(vf.drift(0.0, &[0.0]), vec![0.5]);
        assert_eq!(vf.drift(0.0, &[1.0]), vec![-0.5]);
        assert_eq!(vf.drift_lipschitz(&Domain::interval(0.0, 1.0).unwrap()), 1.0);
    }

    #[test]
    fn rotation_is_tangential_without_pull() {
        let vf = VectorFieldSpec::new(
            Drift::Rotation {
                rate: 2.0,
                pull: 0.0,
                center: vec![0.0, 0.0],
            },
            Diffusion::Identity { dim: 2 },
            Observation::Identity { dim: 2 },
        )
        .unwrap();
        let x = [0.6, -0.8];
        let b = vf.drift(0.0, &x);
        assert!((b[0] * x[0] + b[1] * x[1]).abs() < 1e-15);
        assert!((crate::domain::norm(&b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn radial_field_is_unit_outside_core() {
        let vf = VectorFieldSpec::new(
            Drift::Radial {
                strength: 1.0,
                center: vec![0.0, 0.0],
                core: 0.1,
            },
            Diffusion::Identity { dim: 2 },
            Observation::Zero { dim: 1 },
        )
        .unwrap();
        assert_eq!(vf.drift(0.0, &[0.0, 2.0]), vec![0.0, 1.0]);
        assert_eq!(vf.drift(0.0, &[0.05, 0.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn polynomial_eval_and_bound() {
        // b(x) = 1 - x^2 on [-1, 2]
        let p = Polynomial {
            components: vec![vec![
                Monomial { coef: 1.0, powers: vec![0] },
                Monomial { coef: -1.0, powers: vec![2] },
            ]],
        };
        let vf = VectorFieldSpec::scalar(Drift::Polynomial(p), Observation::Identity { dim: 1 }).unwrap();
        assert_eq!(vf.drift(0.0, &[2.0]), vec![-3.0]);
        let lip = vf.drift_lipschitz(&Domain::interval(-1.0, 2.0).unwrap());
        assert_eq!(lip, 4.0);
    }

    #[test]
    fn gamma0_of_scaled_identity() {
        let vf = VectorFieldSpec::new(
            Drift::Constant { value: vec![0.0, 0.0] },
            Diffusion::Scalar { dim: 2, value: 0.5 },
            Observation::Identity { dim: 2 },
        )
        .unwrap();
        assert!((vf.gamma0() - 0.25).abs() < 1e-14);
        assert!(!vf.sigma_is_identity());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = VectorFieldSpec::new(
            Drift::Constant { value: vec![1.0] },
            Diffusion::Identity { dim: 2 },
            Observation::Identity { dim: 2 },
        );
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn parses_from_toml() {
        let src = r#"
            drift = { kind = "linear", matrix = [[-1.0]], offset = [0.5] }
            diffusion = { kind = "identity", dim = 1 }
            observation = { kind = "identity", dim = 1 }
        "#;
        let vf: VectorFieldSpec = toml::from_str(src).unwrap();
        assert_eq!(vf, attract());
    }
}
