use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point is {distance:e} away from the boundary (tolerance {tolerance:e})")]
    NotOnBoundary { distance: f64, tolerance: f64 },

    #[error("initial state lies outside the closed domain (distance {0:e})")]
    OutsideDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("node {node} has an empty reachable set at step {step}; increase omega_max")]
    Unreachable { step: usize, node: usize },

    #[error("row {0} holds only unreachable values")]
    EmptyRow(usize),

    #[error("tau = {tau} is not a positive multiple of dt = {dt} no larger than t = {t}")]
    InvalidTau { tau: f64, dt: f64, t: f64 },

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("negative density {value:e} in cell {cell} at step {step}")]
    NegativeDensity { step: usize, cell: usize, value: f64 },

    #[error("Riccati solution lost positive-definiteness at step {0}")]
    NotPositiveDefinite(usize),

    #[error("covariance is singular at t = {0}")]
    Singular(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifacts: {0:?}")]
    MissingArtifacts(Vec<String>),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }
}
