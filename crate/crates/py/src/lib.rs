//! Python bindings: domain queries, scenario runs and artifact readers.

use std::path::PathBuf;

use mortensen::domain::Domain;
use mortensen::harness::{self, ExperimentConfig, ScenarioKind};
use mortensen::{io, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Format { .. } | Error::MissingArtifacts(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Domain", frozen)]
struct PyDomain(Domain);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn interval(a: f64, b: f64) -> PyResult<Self> {
        Domain::interval(a, b).map(PyDomain).map_err(err)
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Domain::new_box(lo, hi).map(PyDomain).map_err(err)
    }

    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Domain::ball(center, radius).map(PyDomain).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.0.project(&x))
    }

    fn dist(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.0.dist(&x))
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        self.check(&x)?;
        Ok(self.0.contains(&x))
    }

    fn outward_normal(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        self.0.outward_normal(&x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

impl PyDomain {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("expected a point of length {}, got {}", self.0.dim(), x.len())));
        }
        Ok(())
    }
}

/// Runs a config (optionally overriding seed and kind); returns `report.json` as text.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None, kind=None))]
fn run_scenario(py: Python<'_>, config: PathBuf, out: PathBuf, seed: Option<u64>, kind: Option<String>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::load(&config).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = kind {
        cfg.kind = serde_json::from_value::<ScenarioKind>(serde_json::Value::String(k.clone()))
            .map_err(|_| PyValueError::new_err(format!("unknown scenario kind {k:?}")))?;
    }
    let report = py.detach(|| harness::run_scenario(&cfg, &out)).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Validates a config file without running it.
#[pyfunction]
fn validate_config(config: PathBuf) -> PyResult<()> {
    ExperimentConfig::load(&config).and_then(|c| c.validate()).map_err(err)
}

/// Names of manifest entries whose digest no longer matches.
#[pyfunction]
fn verify_manifest(dir: PathBuf) -> PyResult<Vec<String>> {
    harness::verify_manifest(&dir).map_err(err)
}

#[pyfunction]
fn emit_plotdata(dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    harness::emit_plotdata(&dir).map_err(err)
}

/// Reads a VFLD file as `(label_json, axes, times, rows)`; masked nodes are NaN.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn read_vfld(path: PathBuf) -> PyResult<(String, Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let f = io::read_vfld(&path).map_err(err)?;
    let axes = (0..f.grid.dim()).map(|a| f.grid.axis(a).to_vec()).collect();
    let times = (0..f.rows()).map(|k| f.times.t(k)).collect();
    let rows = (0..f.rows()).map(|k| f.row(k).to_vec()).collect();
    let label = serde_json::to_string(&f.label).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((label, axes, times, rows))
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(verify_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(emit_plotdata, m)?)?;
    m.add_function(wrap_pyfunction!(read_vfld, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
