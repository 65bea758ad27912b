//! Monte Carlo exit times of Itô diffusions and of their Euler schemes.
//!
//! The crate simulates a diffusion `dX = mu(X) dt + sigma(X) dW` together
//! with Euler schemes on several grids, all driven by one Brownian path, and
//! measures how far the discrete exit time `theta^pi` from a domain is from
//! the continuous one. The distance process `P = delta(X)` of a signed
//! distance `delta` decides exits on both sides.
//!
//! Modules, bottom up: [`grid`] (time grids and their projections),
//! [`model`] (dynamics, domains, assumption checks, the model zoo),
//! [`simulate`] (random streams, Brownian drivers, Euler paths, the coupled
//! engine), [`exit`] (exit functionals), [`estimate`] (Monte Carlo
//! statistics and inequality checks) and [`harness`] (rate experiments).

pub mod error;
pub mod estimate;
pub mod exit;
pub mod grid;
pub mod harness;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
pub use exit::{ExitRecord, ExitTime};
pub use grid::TimeGrid;
pub use model::{Domain, Problem, SdeModel};

/// Library version, recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
