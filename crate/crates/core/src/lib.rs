//! Monte-Carlo laboratory for random default times.
//!
//! The crate builds random times on simulated Brownian (or Poisson)
//! filtrations, computes their Azéma supermartingales `Z_t = P(tau > t | F_t)`,
//! the hazard process `Gamma = -ln Z`, the martingale hazard process
//! `Lambda = int da / Z_-`, and checks the relations between them with a
//! battery of Monte-Carlo tests.
//!
//! Modules follow the pipeline order:
//! [`grid_paths`] → [`random_times`] → [`azema`] → [`hazard`] →
//! [`stat_tests`] → [`lab`].

pub mod azema;
pub mod error;
pub mod grid_paths;
pub mod hazard;
pub mod lab;
pub mod random_times;
pub mod regression;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use error::{LabError, Result};
