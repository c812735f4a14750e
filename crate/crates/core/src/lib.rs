//! Deterministic observers for state-constrained dynamics: reflected and
//! penalized integrators, cost-to-come dynamic programming, a boundary-aware
//! HJB solver, a Kalman cross-check and a Zakai filter with its
//! small-noise limit.

pub mod cost;
pub mod domain;
pub mod dp;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod harness;
pub mod hjb;
pub mod io;
pub mod kalman;
pub mod paths;
pub mod rng;
pub mod stats;
pub mod zakai;

pub use domain::Domain;
pub use error::{Error, Result};
pub use fields::{Diffusion, Drift, Mat, Observation, VectorFieldSpec};
pub use paths::{DisturbancePath, IntegratorTag, ObservationPath, TimeGrid, Trajectory};
