//! Experiment configuration, the scenario pipelines and their reports.
//!
//! A run reads one TOML config, writes CSV/VFLD artifacts under an output
//! directory, a `report.json` with metrics and tolerance checks, and a
//! `MANIFEST.sha256` (in `sha256sum -c` format) covering every artifact.
//! Wall-clock times go to `timing.json`, which the manifest leaves out so
//! that repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{CostSpec, InitialCost};
use crate::domain::Domain;
use crate::dp::{bellman_residual, dp_solve, extract_observer, ControlLattice, DpMode, DpProblem};
use crate::dynamics::{holder_quotient, integrate_penalized, integrate_reflected, max_dist_to_domain, synthesize_observation};
use crate::error::{Error, Result};
use crate::fields::VectorFieldSpec;
use crate::grid::{is_reachable, StateGrid, ValueField};
use crate::hjb::{hjb_residual_report, hjb_solve, BoundaryMode, Flux, HjbScheme, ResidualReport};
use crate::io::{self, fmt_f64, LaplaceRow};
use crate::kalman::{kalman_estimate, LinearModel};
use crate::paths::{DisturbancePath, ObservationPath, TimeGrid, Trajectory};
use crate::rng;
use crate::stats::{loglog_slope, non_increasing, strictly_decreasing};
use crate::zakai::{dual_solve, duality_gap, laplace_functional, wall_slopes, zakai_solve_psi, Probe};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "MANIFEST.sha256";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Truth and observation only.
    Simulate,
    /// Truth, observation, constrained DP and the observer path.
    Twin,
    KappaSweep,
    KalmanXcheck,
    HjbVsDp,
    LaplaceSweep,
    HolderCheck,
    BellmanCheck,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::Twin => "twin",
            ScenarioKind::KappaSweep => "kappa-sweep",
            ScenarioKind::KalmanXcheck => "kalman-xcheck",
            ScenarioKind::HjbVsDp => "hjb-vs-dp",
            ScenarioKind::LaplaceSweep => "laplace-sweep",
            ScenarioKind::HolderCheck => "holder-check",
            ScenarioKind::BellmanCheck => "bellman-check",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Twin experiment: truth from `x0` under a Gaussian disturbance, observed
/// with Gaussian noise, both held constant over `hold` observation steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinSpec {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub obs_dt: f64,
    #[serde(default = "one")]
    pub disturbance_std: f64,
    #[serde(default = "one")]
    pub noise_std: f64,
    #[serde(default = "one_usize")]
    pub hold: usize,
}

/// Space, time and control resolution of the DP (and default for the HJB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: Vec<usize>,
    pub dt: f64,
    pub controls: usize,
    pub omega_max: f64,
}

fn default_pulse_widths() -> Vec<f64> {
    (0..9).map(|j| 0.1 * 10f64.powf(-0.5 * j as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSpec {
    /// Strictly increasing penalty strengths.
    pub values: Vec<f64>,
    /// Random `(x0, w)` pairs for the trajectory rate.
    #[serde(default)]
    pub trajectories: usize,
    #[serde(default = "default_traj_dt")]
    pub traj_dt: f64,
    #[serde(default = "one")]
    pub traj_std: f64,
    /// Widths of the unit-energy outward pulses probing the distance
    /// envelope (empty: skip the envelope).
    #[serde(default = "default_pulse_widths")]
    pub pulse_widths: Vec<f64>,
    #[serde(default = "one")]
    pub pulse_energy: f64,
}

fn default_traj_dt() -> f64 {
    1e-3
}

fn default_cfl() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    /// Sub mode must match the DP.
    Agree,
    /// Sub and super modes must differ at the walls.
    Contrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbSpec {
    #[serde(default)]
    pub flux: Option<Flux>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Output step (defaults to the DP step); sub-steps are adaptive.
    #[serde(default)]
    pub dt: Option<f64>,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZakaiSpec {
    pub cells: usize,
    pub dt: f64,
    /// Strictly decreasing noise levels of the Laplace sweep.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    /// Noise levels for the wall-slope contrast.
    #[serde(default)]
    pub wall_epsilons: Vec<f64>,
    /// Noise level of the duality check.
    #[serde(default)]
    pub duality_epsilon: Option<f64>,
    #[serde(default = "zero_probe")]
    pub duality_probe: Probe,
}

fn zero_probe() -> Probe {
    Probe::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanSpec {
    /// RK4 step of the Riccati/estimator integration.
    #[serde(default = "default_traj_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellmanSpec {
    pub taus: Vec<f64>,
    /// Sampled `(t, x)` pairs per tau (0: all).
    #[serde(default)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSpec {
    pub paths: usize,
    pub dt: f64,
}

/// Declared tolerances; defaults are the acceptance thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub value_slope: f64,
    pub traj_slope: f64,
    pub envelope_ratio: f64,
    pub holder_ratio: f64,
    pub kalman_sup: f64,
    pub argmin_cells: f64,
    pub bellman: f64,
    pub hjb_dp: f64,
    pub interior: f64,
    pub contrast_factor: f64,
    pub duality: f64,
    pub laplace_final: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            value_slope: -0.20,
            traj_slope: -0.22,
            envelope_ratio: 3.0,
            holder_ratio: 2.0,
            kalman_sup: 5e-2,
            argmin_cells: 2.0,
            bellman: 5e-3,
            hjb_dp: 5e-2,
            interior: 2e-2,
            contrast_factor: 5.0,
            duality: 1e-3,
            laplace_final: 7e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    pub domain: Domain,
    pub model: VectorFieldSpec,
    pub psi: InitialCost,
    pub twin: TwinSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub kappa: Option<KappaSpec>,
    #[serde(default)]
    pub hjb: Option<HjbSpec>,
    #[serde(default)]
    pub zakai: Option<ZakaiSpec>,
    #[serde(default)]
    pub kalman: Option<KalmanSpec>,
    #[serde(default)]
    pub bellman: Option<BellmanSpec>,
    #[serde(default)]
    pub holder: Option<HolderSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(cfg_err(format!("{what} must be positive, got {v}")))
    }
}

fn divides(what: &str, coarse: f64, fine: f64) -> Result<()> {
    let r = coarse / fine;
    if r < 1.0 - 1e-9 || (r - r.round()).abs() > 1e-6 {
        return Err(cfg_err(format!("{what} = {fine} must divide {coarse}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&src)
    }

    /// Checks everything the selected pipeline needs before any compute.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.model.validate()?;
        let n = self.domain.dim();
        if self.model.state_dim() != n {
            return Err(cfg_err(format!("model has state dimension {}, domain {n}", self.model.state_dim())));
        }
        self.psi.validate(Some(n))?;
        let tw = &self.twin;
        if tw.x0.len() != n || self.domain.dist(&tw.x0) > self.domain.tol_boundary() {
            return Err(cfg_err("twin.x0 must be a point of the closed domain"));
        }
        positive("twin.horizon", tw.horizon)?;
        positive("twin.obs_dt", tw.obs_dt)?;
        divides("twin.obs_dt", tw.horizon, tw.obs_dt)?;
        if tw.hold == 0 {
            return Err(cfg_err("twin.hold must be at least 1"));
        }
        let g = &self.grid;
        if g.nodes.len() != n || g.nodes.iter().any(|&c| c < 3) {
            return Err(cfg_err("grid.nodes needs at least 3 nodes per axis"));
        }
        positive("grid.dt", g.dt)?;
        divides("grid.dt", tw.obs_dt, g.dt)?;
        positive("grid.omega_max", g.omega_max)?;
        if g.controls < 3 || g.controls % 2 == 0 {
            return Err(cfg_err("grid.controls must be odd and at least 3"));
        }
        let need = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(cfg_err(format!("kind `{}` needs a [{section}] section", self.kind.name())))
            }
        };
        match self.kind {
            ScenarioKind::KappaSweep => need(self.kappa.is_some(), "kappa")?,
            ScenarioKind::HjbVsDp => need(self.hjb.is_some(), "hjb")?,
            ScenarioKind::LaplaceSweep => need(self.zakai.is_some(), "zakai")?,
            ScenarioKind::HolderCheck => need(self.holder.is_some(), "holder")?,
            ScenarioKind::BellmanCheck => need(self.bellman.is_some(), "bellman")?,
            _ => {}
        }
        if let Some(k) = &self.kappa {
            if k.values.is_empty() {
                return Err(cfg_err("kappa.values is empty"));
            }
            if k.values.iter().any(|&v| !(v.is_finite() && v > 0.0)) || !k.values.windows(2).all(|w| w[0] < w[1]) {
                return Err(cfg_err("kappa.values must be positive and strictly increasing"));
            }
            positive("kappa.traj_dt", k.traj_dt)?;
            divides("kappa.traj_dt", tw.obs_dt, k.traj_dt)?;
            if k.pulse_widths.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
                return Err(cfg_err("kappa.pulse_widths must be positive"));
            }
        }
        if let Some(h) = &self.hjb {
            HjbScheme::new(h.flux.unwrap_or(Flux::LaxFriedrichs), h.cfl, BoundaryMode::Sub)?;
            let dt = h.dt.unwrap_or(g.dt);
            positive("hjb.dt", dt)?;
            divides("hjb.dt", tw.obs_dt, dt)?;
            divides("hjb.dt", g.dt, dt)?;
            if !self.model.sigma_is_identity() || self.model.noise_dim() != n {
                return Err(cfg_err("the HJB solver needs sigma = identity"));
            }
        }
        if let Some(z) = &self.zakai {
            if n != 1 {
                return Err(cfg_err("the Zakai solver is one-dimensional"));
            }
            if z.cells < 3 {
                return Err(cfg_err("zakai.cells must be at least 3"));
            }
            positive("zakai.dt", z.dt)?;
            divides("zakai.dt", tw.obs_dt, z.dt)?;
            if self.kind == ScenarioKind::LaplaceSweep {
                if z.epsilons.is_empty() {
                    return Err(cfg_err("zakai.epsilons is empty"));
                }
                if z.probes.is_empty() {
                    return Err(cfg_err("zakai.probes is empty"));
                }
            }
            if z.epsilons.iter().any(|&e| !(e.is_finite() && e > 0.0)) || !z.epsilons.windows(2).all(|w| w[0] > w[1]) {
                return Err(cfg_err("zakai.epsilons must be positive and strictly decreasing"));
            }
            if z.wall_epsilons.iter().chain(&z.duality_epsilon).any(|&e| !(e.is_finite() && e > 0.0)) {
                return Err(cfg_err("zakai noise levels must be positive"));
            }
            let (lo, hi) = self.domain.bounds();
            let h = (hi[0] - lo[0]) / (z.cells - 1) as f64;
            let bmax = self.model.max_drift(&self.domain, 4 * z.cells);
            if z.dt * bmax > 0.5 * h {
                return Err(cfg_err(format!(
                    "zakai.dt = {} violates the upwind limit dt * max|b| <= h/2 = {:.3e}",
                    z.dt,
                    0.5 * h
                )));
            }
        }
        if let Some(b) = &self.bellman {
            if b.taus.is_empty() {
                return Err(cfg_err("bellman.taus is empty"));
            }
            for &tau in &b.taus {
                positive("bellman.tau", tau)?;
                divides("bellman.tau", tau, g.dt)?;
                if tau > tw.horizon {
                    return Err(cfg_err("bellman.tau exceeds the horizon"));
                }
            }
        }
        if let Some(h) = &self.holder {
            if h.paths == 0 {
                return Err(cfg_err("holder.paths must be positive"));
            }
            positive("holder.dt", h.dt)?;
            divides("holder.dt", tw.obs_dt, h.dt)?;
        }
        Ok(())
    }

    pub fn state_grid(&self) -> Result<StateGrid> {
        StateGrid::new(self.domain.clone(), &self.grid.nodes)
    }

    pub fn times(&self) -> Result<TimeGrid> {
        TimeGrid::span(0.0, self.twin.horizon, self.grid.dt)
    }

    fn obs_grid(&self) -> Result<TimeGrid> {
        TimeGrid::span(0.0, self.twin.horizon, self.twin.obs_dt)
    }

    /// Truth trajectory and its observation for the configured seed.
    pub fn twin(&self) -> Result<(Trajectory, ObservationPath)> {
        let g = self.obs_grid()?;
        let tw = &self.twin;
        let w = DisturbancePath::gaussian(g, self.model.noise_dim(), tw.disturbance_std, tw.hold, self.seed, 0);
        let truth = integrate_reflected(&self.model, &self.domain, &tw.x0, &w)?;
        let nu = DisturbancePath::gaussian(g, self.model.obs_dim(), tw.noise_std, tw.hold, self.seed, 1);
        let obs = synthesize_observation(&truth, &self.model, &nu)?;
        Ok((truth, obs))
    }

    pub fn dp_problem(&self, obs: &ObservationPath, mode: DpMode) -> Result<DpProblem> {
        DpProblem::new(
            self.model.clone(),
            self.state_grid()?,
            CostSpec::new(self.psi.clone(), obs.clone()),
            mode,
            ControlLattice::new(self.model.noise_dim(), self.grid.controls, self.grid.omega_max)?,
            self.times()?,
        )
    }

    fn hjb_scheme(&self, mode: BoundaryMode) -> Result<HjbScheme> {
        let h = self.hjb.as_ref().ok_or_else(|| cfg_err("missing [hjb] section"))?;
        let mut s = HjbScheme::default_for(self.domain.dim(), mode);
        if let Some(f) = h.flux {
            s.flux = f;
        }
        s.cfl = h.cfl;
        s.validate()?;
        Ok(s)
    }

    fn hjb_times(&self) -> Result<TimeGrid> {
        let dt = self.hjb.as_ref().and_then(|h| h.dt).unwrap_or(self.grid.dt);
        TimeGrid::span(0.0, self.twin.horizon, dt)
    }
}

/// One tolerance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `<=`, `<`, `>`, or a named property such as `decreasing`.
    pub relation: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: "<=".into(),
            pass: value <= bound,
        }
    }

    pub fn above(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: ">".into(),
            pass: value > bound,
        }
    }

    pub fn holds(name: &str, relation: &str, pass: bool) -> Self {
        Check {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: relation.into(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Artifact file names relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock seconds per stage; kept out of `report.json`.
    #[serde(skip)]
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        RunReport {
            name: cfg.name.clone(),
            kind: cfg.kind,
            seed: cfg.seed,
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            timing: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    fn metric_set(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(REPORT_FILE);
        let src = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&src)?)
    }
}

/// Output sink that records every artifact it writes.
struct Out<'a> {
    dir: &'a Path,
    report: &'a mut RunReport,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        if !self.report.artifacts.iter().any(|a| a == name) {
            self.report.artifacts.push(name.to_string());
        }
        self.dir.join(name)
    }
}

/// Runs the pipeline selected by `cfg.kind`, writing artifacts, report and
/// manifest under `out`.
pub fn run_scenario(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut report = RunReport::new(cfg);
    let start = Instant::now();
    {
        let mut o = Out { dir: out, report: &mut report };
        match cfg.kind {
            ScenarioKind::Simulate => simulate(cfg, &mut o)?,
            ScenarioKind::Twin => twin(cfg, &mut o)?,
            ScenarioKind::KappaSweep => kappa_sweep(cfg, &mut o)?,
            ScenarioKind::KalmanXcheck => kalman_xcheck(cfg, &mut o)?,
            ScenarioKind::HjbVsDp => hjb_vs_dp(cfg, &mut o)?,
            ScenarioKind::LaplaceSweep => laplace_sweep(cfg, &mut o)?,
            ScenarioKind::HolderCheck => holder_check(cfg, &mut o)?,
            ScenarioKind::BellmanCheck => bellman_check(cfg, &mut o)?,
        }
    }
    report.timing.insert("total".into(), start.elapsed().as_secs_f64());
    write_report(out, &report)?;
    Ok(report)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_report(out: &Path, report: &RunReport) -> Result<()> {
    write_json(&out.join(REPORT_FILE), report)?;
    write_json(&out.join(TIMING_FILE), &report.timing)?;
    let mut names = report.artifacts.clone();
    names.push(REPORT_FILE.into());
    names.sort();
    let mut manifest = String::new();
    for name in names {
        manifest.push_str(&format!("{}  {name}\n", sha256_file(&out.join(&name))?));
    }
    let p = out.join(MANIFEST_FILE);
    fs::write(&p, manifest).map_err(|e| Error::io(&p, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Re-hashes every artifact listed in the manifest; returns the names whose
/// digest no longer matches (or that are missing).
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let p = dir.join(MANIFEST_FILE);
    let src = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let mut bad = Vec::new();
    for line in src.lines().filter(|l| !l.trim().is_empty()) {
        let (digest, name) = line.split_once("  ").ok_or_else(|| Error::Format {
            what: "manifest",
            reason: format!("malformed line {line:?}"),
        })?;
        match sha256_file(&dir.join(name)) {
            Ok(d) if d == digest => {}
            _ => bad.push(name.to_string()),
        }
    }
    Ok(bad)
}

fn timed<T>(o: &mut Out, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let s = Instant::now();
    let r = f()?;
    *o.report.timing.entry(stage.into()).or_default() += s.elapsed().as_secs_f64();
    Ok(r)
}

fn write_twin(o: &mut Out, truth: &Trajectory, obs: &ObservationPath) -> Result<()> {
    io::write_trajectory_csv(&o.path("truth.csv"), truth)?;
    io::write_observation_csv(&o.path("observation.csv"), obs)
}

/// Row stride giving about a hundred stored rows.
fn stride(times: &TimeGrid) -> usize {
    (times.steps / 100).max(1)
}

fn simulate(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let g = &cfg.domain;
    let dist = (0..truth.len()).map(|k| vec![truth.grid.t(k), g.dist(truth.state(k))]);
    io::write_table(&o.path("truth_dist.csv"), &["t", "dist"], dist)?;
    o.report.metric_set("truth_max_dist", max_dist_to_domain(&truth, g));
    o.report.metric_set("truth_holder", holder_quotient(&truth));
    o.report.metric_set("disturbance_l2", truth.disturbance.l2_norm());
    o.report.push(Check::at_most("truth_in_domain", max_dist_to_domain(&truth, g), g.tol_boundary()));
    Ok(())
}

fn twin(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let p = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let v = timed(o, "dp", || dp_solve(&p))?;
    io::write_vfld(&o.path("value.vfld"), &v)?;
    io::write_value_csv(&o.path("value.csv"), &v, stride(&v.times))?;
    let n = cfg.domain.dim();
    let mut rows = Vec::new();
    let mut sq = 0.0;
    let mut last = 0.0;
    // truth lives on the coarser observation grid
    let every = (truth.grid.dt / v.times.dt).round() as usize;
    for k in (0..v.rows()).step_by(every) {
        let t = v.times.t(k);
        let ob = extract_observer(&v, k)?;
        let x = truth.state(k / every);
        let e = crate::domain::dist(&ob.point, x);
        sq += e * e;
        last = e;
        rows.push(std::iter::once(t).chain(ob.point.iter().copied()).chain(x.iter().copied()).collect::<Vec<_>>());
    }
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("observer{i}")))
        .chain((1..=n).map(|i| format!("truth{i}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let count = rows.len() as f64;
    io::write_table(&o.path("observer.csv"), &header, rows)?;
    let reach = (0..v.rows()).map(|k| {
        let bad = v.row(k).iter().filter(|x| x.is_finite() && !is_reachable(**x)).count();
        vec![v.times.t(k), bad as f64]
    });
    io::write_table(&o.path("reachability.csv"), &["t", "unreachable"], reach)?;
    o.report.metric_set("observer_rmse", (sq / count).sqrt());
    o.report.metric_set("observer_final_error", last);
    o.report.metric_set("unreachable", v.unreachable_count() as f64);
    o.report.push(Check::at_most("value_reachable", v.unreachable_count() as f64, 0.0));
    Ok(())
}

/// Outward pulse of L2 energy `energy` and width `tau` along `normal`; the
/// family over `tau` probes the distance envelope.
fn pulse(cfg: &ExperimentConfig, normal: &[f64], tau: f64, energy: f64) -> Result<DisturbancePath> {
    let grid = TimeGrid::new(0.0, tau / 20.0, 40)?;
    let r = cfg.model.noise_dim();
    let amp = (energy / tau).sqrt();
    DisturbancePath::from_fn(grid, r, |t| {
        let on = t < tau * (1.0 - 1e-9);
        (0..r).map(|i| if on { amp * normal.get(i).copied().unwrap_or(0.0) } else { 0.0 }).collect()
    })
}

fn kappa_sweep(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let ks = cfg.kappa.as_ref().ok_or_else(|| cfg_err("missing [kappa] section"))?;
    let tol = &cfg.tolerances;
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let base = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let v = timed(o, "dp", || dp_solve(&base))?;
    io::write_value_csv(&o.path("value.csv"), &v, stride(&v.times))?;
    let value_err: Vec<f64> = timed(o, "dp_penalized", || {
        ks.values
            .iter()
            .map(|&kappa| {
                let p = cfg.dp_problem(&obs, DpMode::Penalized { kappa })?;
                v.sup_diff(&dp_solve(&p)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    // trajectory rate over random (x0, w)
    let traj_err: Vec<f64> = if ks.trajectories > 0 {
        timed(o, "trajectories", || trajectory_sweep(cfg, ks))?
    } else {
        vec![]
    };

    // distance envelope: worst case over a fixed unit-energy pulse family
    let envelope: Vec<f64> = if ks.pulse_widths.is_empty() {
        vec![]
    } else {
        timed(o, "envelope", || {
            let x0 = cfg.domain.project(&cfg.twin.x0);
            let normal = cfg.domain.normal_unchecked(&x0);
            ks.values
                .par_iter()
                .map(|&kappa| {
                    let mut worst: f64 = 0.0;
                    for &tau in &ks.pulse_widths {
                        let w = pulse(cfg, &normal, tau, ks.pulse_energy)?;
                        let tr = integrate_penalized(&cfg.model, &cfg.domain, &x0, &w, kappa)?;
                        worst = worst.max(max_dist_to_domain(&tr, &cfg.domain) * kappa.sqrt());
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<_>>>()
        })?
    };

    let mut header = vec!["kappa", "value_error"];
    if !traj_err.is_empty() {
        header.push("traj_error");
    }
    if !envelope.is_empty() {
        header.push("scaled_distance");
    }
    let rows = (0..ks.values.len()).map(|i| {
        let mut r = vec![ks.values[i], value_err[i]];
        r.extend(traj_err.get(i));
        r.extend(envelope.get(i));
        r
    });
    io::write_table(&o.path("kappa_errors.csv"), &header, rows)?;

    let r = &mut *o.report;
    for (k, e) in ks.values.iter().zip(&value_err) {
        r.metric_set(format!("value_error@{k}"), *e);
    }
    let slope = loglog_slope(&ks.values, &value_err).unwrap_or(f64::NAN);
    r.metric_set("value_slope", slope);
    r.push(Check::holds("value_error_decreasing", "strictly decreasing", strictly_decreasing(&value_err)));
    r.push(Check::at_most("value_slope", slope, tol.value_slope));
    if !traj_err.is_empty() {
        let s = loglog_slope(&ks.values, &traj_err).unwrap_or(f64::NAN);
        r.metric_set("traj_slope", s);
        r.push(Check::holds("traj_error_decreasing", "strictly decreasing", strictly_decreasing(&traj_err)));
        r.push(Check::at_most("traj_slope", s, tol.traj_slope));
    }
    if !envelope.is_empty() {
        let hi = envelope.iter().copied().fold(0.0, f64::max);
        let lo = envelope.iter().copied().fold(f64::INFINITY, f64::min);
        r.metric_set("envelope_max", hi);
        r.metric_set("envelope_ratio", hi / lo);
        r.push(Check::at_most("envelope_ratio", hi / lo, tol.envelope_ratio));
    }
    Ok(())
}

/// `max over paths of sup_s |x^kappa(s) - x(s)|`, one entry per kappa.
fn trajectory_sweep(cfg: &ExperimentConfig, ks: &KappaSpec) -> Result<Vec<f64>> {
    let grid = TimeGrid::span(0.0, cfg.twin.horizon, ks.traj_dt)?;
    let (lo, hi) = cfg.domain.bounds();
    let mut r = rng::stream(cfg.seed, 2);
    let mut starts = Vec::with_capacity(ks.trajectories);
    while starts.len() < ks.trajectories {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| r.random_range(*a..=*b)).collect();
        if cfg.domain.contains(&x) {
            starts.push(x);
        }
    }
    let hold = ((cfg.twin.obs_dt / ks.traj_dt).round() as usize).max(1);
    let per_path: Vec<Vec<f64>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let w = DisturbancePath::gaussian(grid, cfg.model.noise_dim(), ks.traj_std, hold, cfg.seed, 100 + i as u64);
            let x = integrate_reflected(&cfg.model, &cfg.domain, x0, &w)?;
            ks.values
                .iter()
                .map(|&kappa| integrate_penalized(&cfg.model, &cfg.domain, x0, &w, kappa)?.sup_distance(&x))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..ks.values.len())
        .map(|j| per_path.iter().map(|p| p[j]).fold(0.0, f64::max))
        .collect())
}

fn kalman_xcheck(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let tol = &cfg.tolerances;
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let model = LinearModel::from_spec(&cfg.model, &cfg.psi)?;
    let kdt = cfg.kalman.as_ref().map_or(1e-3, |k| k.dt);
    divides("kalman.dt", cfg.grid.dt, kdt)?;
    let kp = timed(o, "kalman", || kalman_estimate(&model, &obs, kdt))?;
    let n = model.dim();

    let grid = cfg.state_grid()?;
    let p = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let dp = timed(o, "dp", || dp_solve(&p))?;
    let hjb = if cfg.model.sigma_is_identity() {
        let s = cfg.hjb_scheme(BoundaryMode::Sub).or_else(|_| Ok::<_, Error>(HjbScheme::default_for(n, BoundaryMode::Sub)))?;
        let times = cfg.hjb_times()?;
        Some(timed(o, "hjb", || hjb_solve(&cfg.model, &grid, &p.cost, &s, times))?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let (mut dp_sup, mut hjb_sup, mut dp_arg, mut hjb_arg) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..dp.rows() {
        let t = dp.times.t(k);
        let kk = kp.index_of(t)?;
        let xh = kp.estimate(kk).to_vec();
        let exact: Vec<f64> = (0..grid.len()).map(|i| kp.cost_to_come(kk, &grid.node(i))).collect::<Result<_>>()?;
        let sup = |f: &ValueField, r: usize| {
            (0..grid.len())
                .filter(|&i| grid.inside(i) && is_reachable(f.value(r, i)))
                .map(|i| (f.value(r, i) - exact[i]).abs())
                .fold(0.0, f64::max)
        };
        let e_dp = sup(&dp, k);
        let a_dp = crate::domain::dist(&extract_observer(&dp, k)?.point, &xh);
        dp_sup = dp_sup.max(e_dp);
        let mut row = vec![t];
        row.extend(&xh);
        row.push(kp.riccati.at(kk)[(0, 0)]);
        row.extend([e_dp, a_dp]);
        if k > 0 {
            dp_arg = dp_arg.max(a_dp);
        }
        if let Some(h) = &hjb {
            let r = h.index_of(t).ok_or_else(|| Error::GridMismatch("hjb rows miss a DP time".into()))?;
            let e = sup(h, r);
            let a = crate::domain::dist(&extract_observer(h, r)?.point, &xh);
            hjb_sup = hjb_sup.max(e);
            if k > 0 {
                hjb_arg = hjb_arg.max(a);
            }
            row.extend([e, a]);
        }
        rows.push(row);
    }
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("xhat{i}")));
    header.extend(["p11".into(), "dp_error".into(), "dp_argmin_offset".into()]);
    if hjb.is_some() {
        header.extend(["hjb_error".into(), "hjb_argmin_offset".into()]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(&o.path("kalman_xcheck.csv"), &header, rows)?;

    let dx = grid.min_spacing();
    let r = &mut *o.report;
    r.metric_set("dp_sup_error", dp_sup);
    r.metric_set("dp_argmin_offset", dp_arg);
    r.push(Check::at_most("dp_vs_kalman", dp_sup, tol.kalman_sup));
    r.push(Check::at_most("dp_argmin", dp_arg, tol.argmin_cells * dx));
    if hjb.is_some() {
        r.metric_set("hjb_sup_error", hjb_sup);
        r.metric_set("hjb_argmin_offset", hjb_arg);
        r.push(Check::at_most("hjb_vs_kalman", hjb_sup, tol.kalman_sup));
        r.push(Check::at_most("hjb_argmin", hjb_arg, tol.argmin_cells * dx));
    }

    if let Some(z) = &cfg.zakai {
        if let Some(eps) = z.duality_epsilon {
            let gaps = timed(o, "duality", || duality_refinement(cfg, z, &obs, eps))?;
            io::write_table(&o.path("duality.csv"), &["cells", "dt", "gap"], gaps.iter().map(|g| g.to_vec()))?;
            let r = &mut *o.report;
            r.metric_set("duality_gap", gaps[0][2]);
            r.metric_set("duality_gap_refined", gaps[1][2]);
            r.push(Check::at_most("duality_gap", gaps[0][2], tol.duality));
            r.push(Check::at_most("duality_refinement", gaps[1][2], 0.5 * gaps[0][2]));
        }
    }
    Ok(())
}

/// Duality gap on the configured Zakai grid and on the grid refined by two
/// in space and time: rows `(cells, dt, gap)`.
fn duality_refinement(cfg: &ExperimentConfig, z: &ZakaiSpec, obs: &ObservationPath, eps: f64) -> Result<Vec<[f64; 3]>> {
    [(z.cells, z.dt), (2 * z.cells - 1, 0.5 * z.dt)]
        .par_iter()
        .map(|&(cells, dt)| {
            let g = StateGrid::new(cfg.domain.clone(), &[cells])?;
            let times = TimeGrid::span(0.0, cfg.twin.horizon, dt)?;
            let fd = zakai_solve_psi(&cfg.model, &g, obs, &cfg.psi, eps, times)?;
            let du = dual_solve(&cfg.model, &g, obs, &z.duality_probe, eps, times)?;
            Ok([cells as f64, dt, duality_gap(&fd, &du)?])
        })
        .collect()
}

/// Nodes of `closure(G)` with a lattice neighbour outside it.
fn edge_nodes(grid: &StateGrid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| {
            grid.inside(i)
                && (0..grid.dim()).any(|a| {
                    [-1, 1]
                        .iter()
                        .any(|&d| grid.neighbour(i, a, d).is_none_or(|j| !grid.inside(j)))
                })
        })
        .collect()
}

fn hjb_vs_dp(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let spec = cfg.hjb.as_ref().ok_or_else(|| cfg_err("missing [hjb] section"))?;
    let tol = &cfg.tolerances;
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let grid = cfg.state_grid()?;
    let p = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let dp = timed(o, "dp", || dp_solve(&p))?;
    let times = cfg.hjb_times()?;
    let (sub, sup) = timed(o, "hjb", || {
        let sub = hjb_solve(&cfg.model, &grid, &p.cost, &cfg.hjb_scheme(BoundaryMode::Sub)?, times)?;
        let sup = hjb_solve(&cfg.model, &grid, &p.cost, &cfg.hjb_scheme(BoundaryMode::Super)?, times)?;
        Ok((sub, sup))
    })?;
    io::write_vfld(&o.path("value.vfld"), &dp)?;
    io::write_value_csv(&o.path("value.csv"), &dp, stride(&dp.times))?;
    io::write_value_csv(&o.path("hjb_sub.csv"), &sub, stride(&sub.times))?;
    io::write_value_csv(&o.path("hjb_super.csv"), &sup, stride(&sup.times))?;

    // per-row maxima, so the report can be audited from the tables alone
    let per_row: Vec<Vec<f64>> = (0..dp.rows())
        .map(|k| Ok(vec![dp.times.t(k), dp.sup_diff_rows(&sub, k..k + 1)?, dp.sup_diff_rows(&sup, k..k + 1)?]))
        .collect::<Result<_>>()?;
    io::write_table(&o.path("hjb_dp_rows.csv"), &["t", "sub_vs_dp", "super_vs_dp"], per_row.clone())?;
    let sub_dp = per_row.iter().map(|r| r[1]).fold(0.0, f64::max);
    let sup_dp = per_row.iter().map(|r| r[2]).fold(0.0, f64::max);
    let edges = edge_nodes(&grid);
    let gaps: Vec<Vec<f64>> = (0..sub.rows())
        .map(|k| {
            let g = edges.iter().map(|&i| (sub.value(k, i) - sup.value(k, i)).abs()).fold(0.0, f64::max);
            vec![sub.times.t(k), g]
        })
        .collect();
    io::write_table(&o.path("wall_gap.csv"), &["t", "gap"], gaps.clone())?;
    let wall_gap = gaps.iter().map(|r| r[1]).fold(0.0, f64::max);
    let residuals: BTreeMap<&str, ResidualReport> = [
        ("dp", hjb_residual_report(&dp, &cfg.model, &p.cost)?),
        ("sub", hjb_residual_report(&sub, &cfg.model, &p.cost)?),
        ("super", hjb_residual_report(&sup, &cfg.model, &p.cost)?),
    ]
    .into_iter()
    .collect();
    write_json(&o.path("residuals.json"), &residuals)?;
    let last = dp.rows() - 1;
    let ks = sub.index_of(dp.times.t(last)).unwrap_or(sub.rows() - 1);
    let n = grid.dim();
    let rows = (0..grid.len()).filter(|&i| grid.inside(i)).map(|i| {
        let mut r = grid.node(i);
        r.extend([dp.value(last, i), sub.value(ks, i), sup.value(ks, i)]);
        r
    });
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(["dp".into(), "hjb_sub".into(), "hjb_super".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(&o.path("final_slice.csv"), &header, rows)?;

    let r = &mut *o.report;
    r.metric_set("sub_vs_dp", sub_dp);
    r.metric_set("super_vs_dp", sup_dp);
    r.metric_set("wall_gap", wall_gap);
    for (name, rep) in &residuals {
        r.metric_set(format!("{name}_interior_residual"), rep.interior_max_residual);
        r.metric_set(format!("{name}_boundary_sub_residual"), rep.boundary_sub_residual);
        r.metric_set(format!("{name}_boundary_super_residual"), rep.boundary_super_residual);
    }
    match spec.expect {
        Expectation::Agree => r.push(Check::at_most("hjb_sub_vs_dp", sub_dp, tol.hjb_dp)),
        Expectation::Contrast => r.push(Check::above("wall_gap", wall_gap, tol.contrast_factor * tol.interior)),
    }

    if let Some(z) = cfg.zakai.as_ref().filter(|z| !z.wall_epsilons.is_empty()) {
        let rows = timed(o, "zakai", || wall_contrast(cfg, z, &obs))?;
        io::write_table(&o.path("wall_slopes.csv"), &["epsilon", "wall", "bn", "slope", "super_residual", "sub_residual"], rows.clone())?;
        let r = &mut *o.report;
        let better = rows.iter().all(|row| row[4] < row[5]);
        r.metric_set("zakai_worst_super_residual", rows.iter().map(|row| row[4]).fold(0.0, f64::max));
        r.metric_set("zakai_best_sub_residual", rows.iter().map(|row| row[5]).fold(f64::INFINITY, f64::min));
        r.push(Check::holds("zakai_wall_super_type", "super < sub at every outflow wall", better && !rows.is_empty()));
    }
    Ok(())
}

/// Wall slopes of `-eps log q` at the final time, for every wall with
/// outward drift: rows `(eps, wall, b.n, dV/dn, |b.n + dV/dn / 2|, |b.n + dV/dn|)`.
fn wall_contrast(cfg: &ExperimentConfig, z: &ZakaiSpec, obs: &ObservationPath) -> Result<Vec<Vec<f64>>> {
    let g = StateGrid::new(cfg.domain.clone(), &[z.cells])?;
    let times = TimeGrid::span(0.0, cfg.twin.horizon, z.dt)?;
    let (lo, hi) = cfg.domain.bounds();
    let t = times.t_end();
    let walls = [(0.0, lo[0], -1.0), (1.0, hi[0], 1.0)];
    let per_eps: Vec<Vec<Vec<f64>>> = z
        .wall_epsilons
        .par_iter()
        .map(|&eps| {
            let fd = zakai_solve_psi(&cfg.model, &g, obs, &cfg.psi, eps, times)?;
            let (left, right) = wall_slopes(&fd, fd.rows() - 1);
            Ok(walls
                .iter()
                .zip([left, right])
                .filter_map(|(&(id, x, normal), slope)| {
                    let bn = cfg.model.drift(t, &[x])[0] * normal;
                    (bn > 0.0).then(|| vec![eps, id, bn, slope, (bn + 0.5 * slope).abs(), (bn + slope).abs()])
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_eps.into_iter().flatten().collect())
}

fn laplace_sweep(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let z = cfg.zakai.as_ref().ok_or_else(|| cfg_err("missing [zakai] section"))?;
    let tol = &cfg.tolerances;
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let p = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let dp = timed(o, "dp", || dp_solve(&p))?;
    let grid = cfg.state_grid()?;
    let k = dp.rows() - 1;
    let zg = StateGrid::new(cfg.domain.clone(), &[z.cells])?;
    let times = TimeGrid::span(0.0, cfg.twin.horizon, z.dt)?;
    let densities = timed(o, "zakai", || {
        z.epsilons
            .par_iter()
            .map(|&eps| zakai_solve_psi(&cfg.model, &zg, &obs, &cfg.psi, eps, times))
            .collect::<Result<Vec<_>>>()
    })?;
    if let Some(fd) = densities.last() {
        io::write_density_csv(&o.path("density.csv"), fd, stride(&fd.times))?;
    }
    for probe in &z.probes {
        let target = (0..grid.len())
            .filter(|&i| grid.inside(i) && is_reachable(dp.value(k, i)))
            .map(|i| probe.eval(grid.coord(0, i)) + dp.value(k, i))
            .fold(f64::INFINITY, f64::min);
        let rows: Vec<LaplaceRow> = z
            .epsilons
            .iter()
            .zip(&densities)
            .map(|(&eps, fd)| {
                let value = laplace_functional(fd, probe, fd.rows() - 1)?;
                Ok(LaplaceRow {
                    epsilon: eps,
                    value,
                    target,
                    gap: (value - target).abs(),
                })
            })
            .collect::<Result<_>>()?;
        let name = probe.name();
        io::write_laplace_csv(&o.path(&format!("laplace_{name}.csv")), &rows)?;
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let r = &mut *o.report;
        r.metric_set(format!("laplace_{name}_final_gap"), *gaps.last().unwrap());
        r.metric_set(format!("laplace_{name}_slope"), loglog_slope(&eps, &gaps).unwrap_or(f64::NAN));
        r.push(Check::holds(&format!("laplace_{name}_monotone"), "non-increasing", non_increasing(&gaps)));
        r.push(Check::at_most(&format!("laplace_{name}_final"), *gaps.last().unwrap(), tol.laplace_final));
    }
    Ok(())
}

fn holder_check(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let h = cfg.holder.as_ref().ok_or_else(|| cfg_err("missing [holder] section"))?;
    let grid = TimeGrid::span(0.0, cfg.twin.horizon, h.dt)?;
    let (lo, hi) = cfg.domain.bounds();
    let mut r = rng::stream(cfg.seed, 3);
    let mut starts = Vec::with_capacity(h.paths);
    while starts.len() < h.paths {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| r.random_range(*a..=*b)).collect();
        if cfg.domain.contains(&x) {
            starts.push(x);
        }
    }
    let hold = ((cfg.twin.obs_dt / h.dt).round() as usize).max(1);
    let rows: Vec<Vec<f64>> = timed(o, "holder", || {
        starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| {
                let w = DisturbancePath::gaussian(grid, cfg.model.noise_dim(), cfg.twin.disturbance_std, hold, cfg.seed, 1000 + i as u64);
                let coarse = holder_quotient(&integrate_reflected(&cfg.model, &cfg.domain, x0, &w)?);
                let fine = holder_quotient(&integrate_reflected(&cfg.model, &cfg.domain, x0, &w.refine(2))?);
                Ok(vec![i as f64, w.l2_norm(), coarse, fine])
            })
            .collect::<Result<_>>()
    })?;
    io::write_table(&o.path("holder.csv"), &["path", "w_l2", "quotient_dt", "quotient_half_dt"], rows.clone())?;
    let worst_ratio = rows.iter().map(|r| (r[3] / r[2]).max(r[2] / r[3])).fold(0.0, f64::max);
    let finite = rows.iter().all(|r| r[2].is_finite() && r[3].is_finite());
    let rep = &mut *o.report;
    rep.metric_set("holder_max", rows.iter().map(|r| r[2].max(r[3])).fold(0.0, f64::max));
    rep.metric_set("holder_ratio", worst_ratio);
    rep.push(Check::holds("holder_finite", "finite", finite));
    rep.push(Check::at_most("holder_ratio", worst_ratio, cfg.tolerances.holder_ratio));
    Ok(())
}

fn bellman_check(cfg: &ExperimentConfig, o: &mut Out) -> Result<()> {
    let b = cfg.bellman.as_ref().ok_or_else(|| cfg_err("missing [bellman] section"))?;
    let (truth, obs) = timed(o, "twin", || cfg.twin())?;
    write_twin(o, &truth, &obs)?;
    let p = cfg.dp_problem(&obs, DpMode::Constrained)?;
    let v = timed(o, "dp", || dp_solve(&p))?;
    let rows: Vec<Vec<f64>> = timed(o, "bellman", || {
        b.taus
            .iter()
            .map(|&tau| Ok(vec![tau, bellman_residual(&p, &v, tau, b.samples, cfg.seed)?]))
            .collect::<Result<_>>()
    })?;
    io::write_table(&o.path("bellman.csv"), &["tau", "residual"], rows.clone())?;
    let rep = &mut *o.report;
    for row in &rows {
        rep.metric_set(format!("bellman@{}", row[0]), row[1]);
        rep.push(Check::at_most(&format!("bellman_tau_{}", row[0]), row[1], cfg.tolerances.bellman));
    }
    Ok(())
}

/// Long-format plot data `series,xvalue,yvalue` from a finished run:
/// error-vs-kappa, Laplace value vs epsilon, observer vs truth and value
/// slices, whichever the run produced. Returns the files written.
pub fn emit_plotdata(dir: &Path) -> Result<Vec<PathBuf>> {
    let report = RunReport::load(dir)?;
    let missing: Vec<String> = report
        .artifacts
        .iter()
        .filter(|a| !dir.join(a.as_str()).exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let has = |name: &str| report.artifacts.iter().any(|a| a == name);
    let mut written = Vec::new();
    let mut emit = |name: &str, mut pts: Vec<(String, f64, f64)>| -> Result<()> {
        pts.retain(|(_, x, y)| x.is_finite() && y.is_finite() && y.abs() < 1e29);
        pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let p = dir.join(name);
        let mut w = csv::Writer::from_path(&p).map_err(Error::from)?;
        w.write_record(["series", "xvalue", "yvalue"])?;
        for (s, x, y) in pts {
            w.write_record([s, fmt_f64(x), fmt_f64(y)])?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    if has("kappa_errors.csv") {
        let (h, rows) = io::read_table(&dir.join("kappa_errors.csv"))?;
        let mut pts = Vec::new();
        for (c, name) in h.iter().enumerate().skip(1) {
            pts.extend(rows.iter().map(|r| (name.clone(), r[0], r[c])));
        }
        emit("plot_error_vs_kappa.csv", pts)?;
    }
    let laplace: Vec<&String> = report.artifacts.iter().filter(|a| a.starts_with("laplace_")).collect();
    if !laplace.is_empty() {
        let mut pts = Vec::new();
        for a in laplace {
            let probe = a.trim_start_matches("laplace_").trim_end_matches(".csv");
            for r in io::read_laplace_csv(&dir.join(a))? {
                pts.push((format!("{probe}_value"), r.epsilon, r.value));
                pts.push((format!("{probe}_target"), r.epsilon, r.target));
            }
        }
        emit("plot_laplace_vs_epsilon.csv", pts)?;
    }
    // one series per column of time-indexed tables
    let by_time = |name: &str, prefix: &str, pts: &mut Vec<(String, f64, f64)>| -> Result<()> {
        let (h, rows) = io::read_table(&dir.join(name))?;
        for (c, col) in h.iter().enumerate().skip(1) {
            pts.extend(rows.iter().map(|r| (format!("{prefix}{col}"), r[0], r[c])));
        }
        Ok(())
    };
    if has("observer.csv") {
        let mut pts = Vec::new();
        by_time("observer.csv", "", &mut pts)?;
        emit("plot_observer_vs_truth.csv", pts)?;
    } else if has("truth.csv") && has("observation.csv") {
        let mut pts = Vec::new();
        by_time("truth.csv", "truth_", &mut pts)?;
        by_time("observation.csv", "obs_", &mut pts)?;
        emit("plot_truth.csv", pts)?;
    }
    if has("value.csv") {
        let (h, rows) = io::read_table(&dir.join("value.csv"))?;
        let vcol = h.len() - 1;
        // 1D: one series per stored time; 2D: the slice through the
        // middle of the second axis.
        let pts = if h.len() == 3 {
            rows.iter().map(|r| (format!("t={:.4}", r[0]), r[1], r[vcol])).collect()
        } else {
            let mut ys: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            ys.sort_by(f64::total_cmp);
            ys.dedup();
            let mid = ys[ys.len() / 2];
            rows.iter()
                .filter(|r| r[2] == mid)
                .map(|r| (format!("t={:.4}", r[0]), r[1], r[vcol]))
                .collect()
        };
        emit("plot_value_slices.csv", pts)?;
    }
    Ok(written)
}
