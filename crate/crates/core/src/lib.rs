//! Maximum entropy under uncertain observations.
//!
//! The crate fits log-linear maximum-entropy models when only noisy,
//! partial observations of the modeled elements are available. The
//! constraint targets then depend on the model itself, and are refined by
//! expectation-maximization: each E-step completes the observations with
//! the current model's posterior, each M-step solves an ordinary MaxEnt
//! program against the completed targets.
//!
//! Modules:
//! - [`maxent`]: feature tables, partition functions, the dual solver.
//! - [`em`]: observation channels, posteriors and the EM driver.
//! - [`lab`]: random uncertain-MaxEnt programs and the KLD-vs-data harness.
//! - [`mdp`]: finite MDPs, exact solvers, simulation and inverse learning error.
//! - [`irl`]: causal-entropy IRL, its uncertain-observation EM extension and baselines.
//! - [`fugitive`]: the radio-tower tracking scenario and its experiment.
//! - [`experiment`]: CSV rendering, ordering verdicts and the named property checks.
//! - [`io`]: text formats for MDPs and observation datasets.

pub mod em;
mod error;
pub mod experiment;
pub mod fugitive;
pub mod io;
pub mod irl;
pub mod lab;
pub mod math;
pub mod maxent;
pub mod mdp;
pub mod optim;
pub mod seed;

pub use error::{Error, Result};
pub use maxent::{Distribution, FeatureTable, Weights};
pub use optim::SolverConfig;
