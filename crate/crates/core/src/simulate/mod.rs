//! Brownian drivers, Euler paths and the coupled multi-level engine.

mod coupled;
mod driver;
mod euler;
mod rng;

pub use coupled::{simulate_coupled, simulate_many, simulate_reference, simulate_reference_many, CoupledConfig, CoupledPath, Layout, LevelOutcome, ReferenceMode, Stopped, Track};
pub use driver::{coarsen, refine, sample_increments, BrownianDriver};
pub use euler::{euler_path, EulerPath};
pub use rng::{normal_quantile, CounterRng, Draws, Tag};
