//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use eulerexit::model::zoo::{build, DomainParams};
use eulerexit::model::Problem;
use eulerexit::simulate::{CoupledConfig, Layout, ReferenceMode, Track};

pub const SEED: u64 = 7;

/// A zoo model with its default parameters.
pub fn problem(id: &str) -> Problem {
    build(id, &BTreeMap::new(), DomainParams::default()).expect("zoo model").problem
}

/// Exit-rate layout: meshes `2^-4 .. 2^-(3 + levels)` with a bridge reference
/// `ref_factor` times finer than the finest level.
pub fn rate_layout(levels: u32, ref_factor: usize, horizon: f64) -> Layout {
    Layout::new(&CoupledConfig {
        meshes: (4..4 + levels).map(|k| 0.5f64.powi(k as i32)).collect(),
        ref_factor,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Bridge,
        track: Track::Exit,
        seed: SEED,
    })
    .expect("valid layout")
}
