//! Estimators that draw their own paths.

use rayon::prelude::*;

use super::{mc_mean, McEstimate};
use crate::error::{param, Error, Result};
use crate::harness::{Metric, RateTable};
use crate::model::Problem;
use crate::simulate::{simulate_many, CounterRng, CoupledConfig, Layout, ReferenceMode, Tag, Track};

/// Starts farther than this from the boundary are discarded.
const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEstimate {
    pub overall: McEstimate,
    pub per_start: Vec<McEstimate>,
}

/// Probability that one Euler step of size `h` from a boundary point ends
/// strictly inside. Path `i` starts from `starts[i % starts.len()]`.
pub fn crossing_probability(problem: &Problem, h: f64, starts: &[Vec<f64>], n: usize, seed: u64) -> Result<CrossingEstimate> {
    if !(h > 0.0) {
        return param("mesh must be positive");
    }
    if h > 1.0 {
        return param("mesh exceeds 1");
    }
    let domain = &problem.domain;
    let valid: Vec<&Vec<f64>> = starts
        .iter()
        .filter(|z| z.len() == problem.dim() && domain.delta(z).abs() <= BOUNDARY_TOLERANCE)
        .collect();
    if valid.is_empty() {
        return Err(Error::NoBoundaryStarts);
    }
    let m = valid.len();
    if n < 2 * m {
        return param("need at least two paths per start");
    }
    let rng = CounterRng::new(seed);
    let d = problem.dim();
    let sq = h.sqrt();
    let inside: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|p| {
            let x = valid[p as usize % m];
            let mut mu = vec![0.0; d];
            let mut sigma = vec![0.0; d * d];
            problem.model.drift(x, &mut mu);
            problem.model.diffusion(x, &mut sigma);
            let mut draws = rng.stream(p, Tag::Increments, 0);
            let z: Vec<f64> = (0..d).map(|_| draws.normal()).collect();
            let y: Vec<f64> = (0..d)
                .map(|i| x[i] + mu[i] * h + (0..d).map(|j| sigma[i * d + j] * z[j]).sum::<f64>() * sq)
                .collect();
            if domain.delta(&y) > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let overall = mc_mean(&inside)?;
    let per_start = (0..m)
        .map(|i| mc_mean(&inside.iter().skip(i).step_by(m).copied().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossingEstimate { overall, per_start })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusEstimate {
    pub h: f64,
    /// `P[sup_{t <= T} |Xbar_t - Xbar_{phi_t}| > rho]`.
    pub probability: McEstimate,
    pub events: usize,
    /// `probability / h`.
    pub kappa: f64,
}

/// One-step modulus exceedance of the Euler scheme on each mesh, all meshes
/// on one Brownian path per sample. The supremum is taken over the nodes of
/// the finest mesh refined `ref_factor` times.
#[allow(clippy::too_many_arguments)]
pub fn modulus_tail(
    problem: &Problem,
    meshes: &[f64],
    horizon: f64,
    rho: f64,
    n: usize,
    ref_factor: usize,
    seed: u64,
) -> Result<Vec<ModulusEstimate>> {
    if !(rho > 0.0) {
        return param("rho must be positive");
    }
    if n < 1000 {
        return param("at least 1000 paths are required");
    }
    let cfg = CoupledConfig {
        meshes: meshes.to_vec(),
        ref_factor,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Off,
        track: Track::Path,
        seed,
    };
    let layout = Layout::new(&cfg)?;
    let paths = simulate_many(problem, &layout, n)?;
    meshes
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let hits: Vec<f64> = paths.iter().map(|p| f64::from(u8::from(p.levels[i].modulus > rho))).collect();
            let probability = mc_mean(&hits)?;
            let events = hits.iter().filter(|&&v| v > 0.0).count();
            Ok(ModulusEstimate { h, probability, events, kappa: probability.mean / h })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongError {
    pub table: RateTable,
    /// All errors vanish up to rounding: the scheme is exact for this model.
    pub degenerate: bool,
}

/// Largest error treated as rounding noise.
const EXACT_SCHEME_TOLERANCE: f64 = 1e-10;

/// `(E[sup_{t <= T} |X_t - Xbar_t|^q])^(1/q)` per mesh, against the Euler
/// scheme on a grid `ref_factor` times finer than the finest mesh.
pub fn strong_euler_error(
    problem: &Problem,
    meshes: &[f64],
    horizon: f64,
    q: u32,
    n: usize,
    ref_factor: usize,
    seed: u64,
) -> Result<StrongError> {
    if q < 4 || q % 2 != 0 {
        return param("q must be even and at least 4");
    }
    if ref_factor < 64 {
        return param("reference refinement must be at least 64");
    }
    let cfg = CoupledConfig {
        meshes: meshes.to_vec(),
        ref_factor,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Interpolated,
        track: Track::Path,
        seed,
    };
    let layout = Layout::new(&cfg)?;
    let paths = simulate_many(problem, &layout, n)?;
    let errors = (0..meshes.len())
        .map(|i| {
            let pw: Vec<f64> = paths.iter().map(|p| p.levels[i].sup_error.powi(q as i32)).collect();
            let raw = mc_mean(&pw)?;
            let inv = 1.0 / q as f64;
            let value = raw.mean.powf(inv);
            let slope = if raw.mean > 0.0 { inv * raw.mean.powf(inv - 1.0) } else { 0.0 };
            Ok(raw.map(value, slope))
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate = errors.iter().all(|e| e.mean <= EXACT_SCHEME_TOLERANCE);
    let table = RateTable::new(Metric::SupPath { q }, meshes.to_vec(), errors, vec![0.0; meshes.len()], n, seed)?;
    Ok(StrongError { table, degenerate })
}

/// Empirical constant of the uniform mean-exit bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LHat {
    /// `max` over starts of `mean + 3 stderr`.
    pub value: f64,
    pub per_start: Vec<McEstimate>,
    /// Fraction of censored exits over all starts.
    pub censored: f64,
}

/// Mean discrete exit time on mesh `h` from each start (censored at the
/// horizon), and the largest upper confidence bound.
pub fn estimate_l_hat(problem: &Problem, starts: &[Vec<f64>], h: f64, horizon: f64, n: usize, seed: u64) -> Result<LHat> {
    if starts.is_empty() {
        return param("at least one start is required");
    }
    let cfg = CoupledConfig {
        meshes: vec![h],
        ref_factor: 1,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Off,
        track: Track::Exit,
        seed,
    };
    let layout = Layout::new(&cfg)?;
    let t = layout.horizon();
    let mut per_start = Vec::with_capacity(starts.len());
    let mut censored = 0usize;
    for x in starts {
        let pr = problem.with_start(x.clone())?;
        let paths = simulate_many(&pr, &layout, n)?;
        censored += paths.iter().filter(|p| p.levels[0].exit.is_censored()).count();
        let times: Vec<f64> = paths.iter().map(|p| p.levels[0].exit.capped(t)).collect();
        per_start.push(mc_mean(&times)?);
    }
    let value = per_start.iter().map(|e| e.mean + 3.0 * e.stderr).fold(f64::MIN, f64::max);
    Ok(LHat { value, per_start, censored: censored as f64 / (n * starts.len()) as f64 })
}
