//! Convergence experiments: rate tables, log-log fits and boundary-moment
//! profiles.

use std::fmt;

use crate::error::{param, Error, Result};
use crate::estimate::{mc_mean, McEstimate};
use crate::model::zoo::start_at_distance;
use crate::model::Problem;
use crate::simulate::{simulate_many, simulate_reference_many, CoupledConfig, CoupledPath, Layout, ReferenceMode, Track};

/// Quantity whose mesh dependence a [`RateTable`] records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `E|theta_ref ∧ T - theta^pi ∧ T|^p`.
    ExitTime { p: u32 },
    /// `(E|X_ref - Xbar|^2)^(1/2)` at the stopped times.
    StoppedPosition,
    /// `(E sup |X - Xbar|^q)^(1/q)`.
    SupPath { q: u32 },
    /// `E|P - Pbar|` at the first common stopping time.
    CouplingGap,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::ExitTime { p } => write!(f, "L{p}_exit_time"),
            Metric::StoppedPosition => f.write_str("L2_stopped_position"),
            Metric::SupPath { q } => write!(f, "L{q}_sup_path"),
            Metric::CouplingGap => f.write_str("coupling_gap"),
        }
    }
}

/// One estimate per mesh, all from the same paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub metric: Metric,
    pub meshes: Vec<f64>,
    pub errors: Vec<McEstimate>,
    /// Upper bound on the bias from stopping paths at the horizon.
    pub censor_bias: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl RateTable {
    pub fn new(
        metric: Metric,
        meshes: Vec<f64>,
        errors: Vec<McEstimate>,
        censor_bias: Vec<f64>,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        if meshes.len() != errors.len() || meshes.len() != censor_bias.len() {
            return param("one estimate per mesh is required");
        }
        if meshes.windows(2).any(|w| w[1] >= w[0]) {
            return param("meshes must be strictly decreasing");
        }
        Ok(Self { metric, meshes, errors, censor_bias, n, seed })
    }
}

/// Least-squares line through `(log h, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// The coarsest mesh was left out of the fit.
    pub dropped_coarsest: bool,
}

impl RateFit {
    /// The error shrinks at least linearly, which for the half and quarter
    /// order metrics means the table carries no real discretisation error.
    pub fn super_convergent(&self) -> bool {
        self.slope >= 1.0
    }
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return param("least squares needs at least two matched points");
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateTable("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(RateFit { slope, intercept, r_squared, slope_stderr, dropped_coarsest: false })
}

/// Log-log fit over every mesh of the table.
pub fn fit_rate(table: &RateTable) -> Result<RateFit> {
    if table.meshes.len() < 3 {
        return Err(Error::DegenerateTable("at least three meshes are required".into()));
    }
    if let Some(e) = table.errors.iter().find(|e| !(e.mean > 0.0) || !e.mean.is_finite()) {
        return Err(Error::DegenerateTable(format!("error entry {} is not positive", e.mean)));
    }
    let xs: Vec<f64> = table.meshes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = table.errors.iter().map(|e| e.mean.ln()).collect();
    least_squares(&xs, &ys)
}

/// Below this r² the coarsest mesh is treated as pre-asymptotic.
pub const MIN_R_SQUARED: f64 = 0.95;

/// [`fit_rate`], refitted once without the coarsest mesh when r² is below
/// [`MIN_R_SQUARED`] and at least three meshes remain.
pub fn fit_rate_with_drop(table: &RateTable) -> Result<RateFit> {
    let full = fit_rate(table)?;
    if full.r_squared >= MIN_R_SQUARED || table.meshes.len() < 4 {
        return Ok(full);
    }
    let rest = RateTable { meshes: table.meshes[1..].to_vec(), errors: table.errors[1..].to_vec(), ..table.clone() };
    let mut fit = fit_rate(&rest)?;
    fit.dropped_coarsest = true;
    Ok(fit)
}

/// Settings shared by the coupled experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Strictly decreasing, nested meshes.
    pub meshes: Vec<f64>,
    pub horizon: f64,
    pub n: usize,
    pub seed: u64,
    /// Reference mesh is the finest mesh divided by this; at least 64.
    pub ref_factor: usize,
    /// Exit-time moments to tabulate.
    pub exit_powers: Vec<u32>,
}

impl StudyConfig {
    pub fn new(meshes: Vec<f64>, horizon: f64, n: usize, seed: u64) -> Self {
        Self { meshes, horizon, n, seed, ref_factor: DEFAULT_REF_FACTOR, exit_powers: vec![1] }
    }
}

/// Fine steps of the reference path per step of the finest mesh.
pub const DEFAULT_REF_FACTOR: usize = 64;

/// Every table one set of coupled paths yields.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStudy {
    /// One table per requested exit-time power, in request order.
    pub exit: Vec<RateTable>,
    pub stopped: RateTable,
    pub gap: RateTable,
    pub reference_mean: McEstimate,
    pub reference_censored: f64,
    /// Fraction of paths with either exit censored, per mesh.
    pub censored: Vec<f64>,
    pub horizon: f64,
}

fn check_study(cfg: &StudyConfig) -> Result<()> {
    if cfg.n < 1000 {
        return param("at least 1000 paths are required");
    }
    if cfg.ref_factor < DEFAULT_REF_FACTOR {
        return param("reference refinement must be at least 64");
    }
    if cfg.exit_powers.iter().any(|&p| p == 0) {
        return param("exit-time power must be at least 1");
    }
    Ok(())
}

fn coupled_paths(problem: &Problem, cfg: &StudyConfig) -> Result<(Layout, Vec<CoupledPath>)> {
    check_study(cfg)?;
    let layout = Layout::new(&CoupledConfig {
        meshes: cfg.meshes.clone(),
        ref_factor: cfg.ref_factor,
        horizon: cfg.horizon,
        level: 0.0,
        reference: ReferenceMode::Bridge,
        track: Track::Exit,
        seed: cfg.seed,
    })?;
    let paths = simulate_many(problem, &layout, cfg.n)?;
    Ok((layout, paths))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reference path and Euler schemes on every mesh, driven by one Brownian
/// path per sample, stopped at their exits or the horizon.
pub fn coupled_study(problem: &Problem, cfg: &StudyConfig) -> Result<CoupledStudy> {
    let (layout, paths) = coupled_paths(problem, cfg)?;
    let t = layout.horizon();
    let n = cfg.n;
    let refs: Vec<_> = paths.iter().map(|p| p.reference.as_ref().expect("reference is on")).collect();
    let ref_times: Vec<f64> = refs.iter().map(|s| s.exit.capped(t)).collect();
    let reference_mean = mc_mean(&ref_times)?;
    let reference_censored = refs.iter().filter(|s| s.exit.is_censored()).count() as f64 / n as f64;

    let mut censored = Vec::new();
    let mut exit_errors = vec![Vec::new(); cfg.exit_powers.len()];
    let mut stopped_errors = Vec::new();
    let mut gap_errors = Vec::new();
    for i in 0..cfg.meshes.len() {
        let c = paths
            .iter()
            .filter(|p| p.reference.as_ref().is_some_and(|s| s.exit.is_censored()) || p.levels[i].exit.is_censored())
            .count() as f64
            / n as f64;
        censored.push(c);
        let diffs: Vec<f64> = paths.iter().zip(&ref_times).map(|(p, r)| (r - p.levels[i].exit.capped(t)).abs()).collect();
        for (k, &pw) in cfg.exit_powers.iter().enumerate() {
            let v: Vec<f64> = diffs.iter().map(|x| x.powi(pw as i32)).collect();
            exit_errors[k].push(mc_mean(&v)?);
        }
        let sq: Vec<f64> = paths.iter().zip(&refs).map(|(p, r)| sq_dist(&r.position, &p.levels[i].position)).collect();
        let ms = mc_mean(&sq)?;
        let root = ms.mean.sqrt();
        stopped_errors.push(ms.map(root, if root > 0.0 { 0.5 / root } else { 0.0 }));
        let gaps: Vec<f64> = paths.iter().map(|p| p.levels[i].gap).collect();
        gap_errors.push(mc_mean(&gaps)?);
    }
    // a censored pair can be off by at most T in time
    let bias: Vec<f64> = censored.iter().map(|c| c * t).collect();
    let table = |metric, errors| RateTable::new(metric, cfg.meshes.clone(), errors, bias.clone(), n, cfg.seed);
    Ok(CoupledStudy {
        exit: cfg
            .exit_powers
            .iter()
            .zip(exit_errors)
            .map(|(&p, e)| table(Metric::ExitTime { p }, e))
            .collect::<Result<_>>()?,
        stopped: table(Metric::StoppedPosition, stopped_errors)?,
        gap: table(Metric::CouplingGap, gap_errors)?,
        reference_mean,
        reference_censored,
        censored,
        horizon: t,
    })
}

/// `E|theta_ref ∧ T - theta^pi ∧ T|^p` per mesh.
pub fn exit_time_error_experiment(problem: &Problem, meshes: &[f64], horizon: f64, n: usize, seed: u64, p: u32) -> Result<RateTable> {
    let mut cfg = StudyConfig::new(meshes.to_vec(), horizon, n, seed);
    cfg.exit_powers = vec![p];
    Ok(coupled_study(problem, &cfg)?.exit.remove(0))
}

/// `(E|X_ref - Xbar|^2)^(1/2)` at the stopped times, per mesh.
pub fn stopped_position_error_experiment(problem: &Problem, meshes: &[f64], horizon: f64, n: usize, seed: u64) -> Result<RateTable> {
    let cfg = StudyConfig::new(meshes.to_vec(), horizon, n, seed);
    Ok(coupled_study(problem, &cfg)?.stopped)
}

/// Horizon for a study: eight times a pilot mean of the discrete exit time
/// on mesh `h`, rounded up to a whole number of `coarsest` steps.
pub fn pilot_horizon(problem: &Problem, h: f64, coarsest: f64, seed: u64) -> Result<f64> {
    const PILOT_PATHS: usize = 1000;
    const PILOT_CAP: f64 = 64.0;
    let cap = (PILOT_CAP / coarsest).ceil() * coarsest;
    let layout = Layout::new(&CoupledConfig {
        meshes: if h < coarsest { vec![coarsest, h] } else { vec![h] },
        ref_factor: 1,
        horizon: cap,
        level: 0.0,
        reference: ReferenceMode::Off,
        track: Track::Exit,
        seed,
    })?;
    let paths = simulate_many(problem, &layout, PILOT_PATHS)?;
    let times: Vec<f64> = paths.iter().map(|p| p.levels.last().expect("one level").exit.capped(cap)).collect();
    let mean = mc_mean(&times)?.mean;
    Ok(((8.0 * mean / coarsest).ceil().max(1.0)) * coarsest)
}

/// Mean exit time of the reference path alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMean {
    pub mean: McEstimate,
    pub censored: f64,
    pub horizon: f64,
}

/// `E[theta ∧ T]` of the bridge-corrected reference path on mesh
/// `ref_mesh`. The horizon is rounded up to a whole number of blocks of 64
/// reference steps.
pub fn reference_exit_mean(problem: &Problem, ref_mesh: f64, horizon: f64, n: usize, seed: u64) -> Result<ReferenceMean> {
    const BLOCK: usize = 64;
    let block = ref_mesh * BLOCK as f64;
    if !(block <= 1.0) {
        return param("reference mesh is too coarse");
    }
    let layout = Layout::new(&CoupledConfig {
        meshes: vec![block],
        ref_factor: BLOCK,
        horizon: (horizon / block - 1e-9).ceil().max(1.0) * block,
        level: 0.0,
        reference: ReferenceMode::Bridge,
        track: Track::Exit,
        seed,
    })?;
    let t = layout.horizon();
    let stopped = simulate_reference_many(problem, &layout, n)?;
    let times: Vec<f64> = stopped.iter().map(|s| s.exit.capped(t)).collect();
    let censored = stopped.iter().filter(|s| s.exit.is_censored()).count() as f64 / n as f64;
    Ok(ReferenceMean { mean: mc_mean(&times)?, censored, horizon: t })
}

/// Mean exit times from one starting distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub p0: f64,
    pub discrete: McEstimate,
    pub reference: McEstimate,
    pub censored: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMoments {
    pub h: f64,
    pub rows: Vec<BoundaryRow>,
    /// Smallest `D` with `E[theta^pi] <= D (p0 + sqrt h)` on every row.
    pub d: f64,
}

/// Settings of a boundary-moment run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConfig {
    pub h: f64,
    pub start_distances: Vec<f64>,
    pub n: usize,
    pub horizon: f64,
    pub ref_factor: usize,
    pub seed: u64,
}

/// Exit-time means of the Euler scheme and of the reference path started at
/// distance `p0` from the boundary, for each `p0`. Starts are placed by
/// moving from `x0` along `direction`.
pub fn boundary_moment_experiment(problem: &Problem, direction: &[f64], cfg: &BoundaryConfig) -> Result<BoundaryMoments> {
    let r = problem.domain.r;
    if cfg.start_distances.is_empty() {
        return param("at least one start distance is required");
    }
    if let Some(p) = cfg.start_distances.iter().find(|&&p| !(p > 0.0 && p <= r)) {
        return param(format!("start distance {p} is outside (0, r]"));
    }
    let layout = Layout::new(&CoupledConfig {
        meshes: vec![cfg.h],
        ref_factor: cfg.ref_factor,
        horizon: cfg.horizon,
        level: 0.0,
        reference: ReferenceMode::Bridge,
        track: Track::Exit,
        seed: cfg.seed,
    })?;
    let t = layout.horizon();
    let mut rows = Vec::with_capacity(cfg.start_distances.len());
    for &p0 in &cfg.start_distances {
        let x = start_at_distance(&problem.domain, problem.model.x0(), direction, p0)?;
        let pr = problem.with_start(x)?;
        let paths = simulate_many(&pr, &layout, cfg.n)?;
        let disc: Vec<f64> = paths.iter().map(|p| p.levels[0].exit.capped(t)).collect();
        let refs: Vec<f64> = paths.iter().map(|p| p.reference.as_ref().expect("reference is on").exit.capped(t)).collect();
        let censored = paths
            .iter()
            .filter(|p| p.levels[0].exit.is_censored() || p.reference.as_ref().is_some_and(|s| s.exit.is_censored()))
            .count() as f64
            / cfg.n as f64;
        rows.push(BoundaryRow { p0, discrete: mc_mean(&disc)?, reference: mc_mean(&refs)?, censored });
    }
    let sq = cfg.h.sqrt();
    let d = rows.iter().map(|row| row.discrete.mean / (row.p0 + sq)).fold(0.0, f64::max);
    Ok(BoundaryMoments { h: cfg.h, rows, d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::zoo::{build, DomainParams};
    use crate::model::{ClampedShape, Domain, FnDynamics, SdeModel, Shape};
    use crate::simulate::{CounterRng, Tag};
    use std::collections::BTreeMap;

    fn synthetic(mut errors: impl FnMut(f64) -> f64) -> RateTable {
        let meshes: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
        let errors = meshes.iter().map(|&h| McEstimate::new(errors(h), 0.0, 1000)).collect();
        RateTable::new(Metric::ExitTime { p: 1 }, meshes, errors, vec![0.0; 6], 1000, 0).unwrap()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_rate(&synthetic(|h| 0.7 * h.sqrt())).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-10);
        let fit = fit_rate(&synthetic(|h| h)).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.super_convergent());
    }

    #[test]
    fn noisy_power_law() {
        let mut s = CounterRng::new(11).stream(0, Tag::Auxiliary, 0);
        let noise: Vec<f64> = (0..6).map(|_| 0.01 * s.normal()).collect();
        let mut k = 0;
        let table = synthetic(|h| {
            k += 1;
            2.0 * h.sqrt() * (1.0 + noise[k - 1])
        });
        let fit = fit_rate(&table).unwrap();
        assert!((0.45..=0.55).contains(&fit.slope), "{fit:?}");
    }

    #[test]
    fn degenerate_tables() {
        let table = synthetic(|h| if h < 0.01 { 0.0 } else { h });
        assert!(matches!(fit_rate(&table), Err(Error::DegenerateTable(_))));
        let mut short = synthetic(|h| h);
        short.meshes.truncate(2);
        short.errors.truncate(2);
        assert!(fit_rate(&short).is_err());
        assert!(RateTable::new(Metric::CouplingGap, vec![0.1, 0.2], vec![McEstimate::new(1.0, 0.0, 2); 2], vec![0.0; 2], 2, 0).is_err());
    }

    #[test]
    fn coarsest_mesh_drop() {
        // a bent coarse end ruins the fit once
        let table = synthetic(|h| if h > 0.05 { 40.0 * h } else { h.sqrt() });
        let fit = fit_rate_with_drop(&table).unwrap();
        assert!(fit.dropped_coarsest);
        assert!((fit.slope - 0.5).abs() < 1e-12);
        let fit = fit_rate_with_drop(&synthetic(|h| h.sqrt())).unwrap();
        assert!(!fit.dropped_coarsest);
    }

    #[test]
    fn metric_names() {
        assert_eq!(Metric::ExitTime { p: 1 }.to_string(), "L1_exit_time");
        assert_eq!(Metric::StoppedPosition.to_string(), "L2_stopped_position");
        assert_eq!(Metric::SupPath { q: 4 }.to_string(), "L4_sup_path");
        assert_eq!(Metric::CouplingGap.to_string(), "coupling_gap");
    }

    fn drift_only(m: f64) -> Problem {
        let model = SdeModel::new(
            FnDynamics::new(1, move |_: &[f64], o: &mut [f64]| o[0] = m, |_: &[f64], o: &mut [f64]| o[0] = 0.0),
            1.0,
            1.0,
            2.0,
            vec![-0.5],
        )
        .unwrap();
        let shape = ClampedShape::new(Shape::HalfLine { boundary: 0.0, inside_below: true }, None);
        let domain = Domain::new(shape, 0.03, 1.0, 0.0, (vec![-1.0], vec![1.0])).unwrap();
        Problem::new(model, domain).unwrap()
    }

    #[test]
    fn deterministic_crossing_positions_are_super_convergent() {
        // the state at the continuous exit is the boundary, the Euler state
        // overshoots by less than one step of drift
        let p = drift_only(1.3);
        let meshes: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
        let table = stopped_position_error_experiment(&p, &meshes, 2.0, 1000, 1).unwrap();
        for (h, e) in table.meshes.iter().zip(&table.errors) {
            assert!(e.mean <= 1.3 * h + 1e-12, "{h}: {e:?}");
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn deterministic_boundary_start() {
        // from distance r with inward drift the discrete exit is the first
        // node after the straight-line crossing
        let p = drift_only(1.0);
        let cfg = BoundaryConfig { h: 1.0 / 64.0, start_distances: vec![0.03], n: 20, horizon: 1.0, ref_factor: 64, seed: 3 };
        let out = boundary_moment_experiment(&p, &[1.0], &cfg).unwrap();
        let row = out.rows[0];
        assert_eq!(row.discrete.mean, 2.0 / 64.0);
        assert!((row.reference.mean - 0.03).abs() < 1e-9);
        let bad = BoundaryConfig { start_distances: vec![0.5], ..cfg };
        assert!(boundary_moment_experiment(&p, &[1.0], &bad).is_err());
    }

    #[test]
    fn interval_reference_mean_from_boundary_layer() {
        // optimal stopping gives E[theta] = c^2 - (c - p0)^2 from distance p0
        let z = build("interval_bm", &BTreeMap::new(), DomainParams::default()).unwrap();
        let cfg = BoundaryConfig {
            h: 1.0 / 64.0,
            start_distances: vec![0.0125, 0.025],
            n: 20_000,
            horizon: 4.0,
            ref_factor: 16,
            seed: 8,
        };
        let out = boundary_moment_experiment(&z.problem, &z.boundary_direction, &cfg).unwrap();
        let c: f64 = 0.5;
        for row in &out.rows {
            let exact = c * c - (c - row.p0).powi(2);
            assert!((row.reference.mean - exact).abs() < 3.0 * row.reference.stderr, "{row:?} vs {exact}");
            assert!(row.discrete.mean > row.reference.mean);
            assert!(row.discrete.mean <= out.d * (row.p0 + cfg.h.sqrt()) + 1e-15);
        }
    }

    #[test]
    fn reference_mean_matches_optional_stopping() {
        let z = build("interval_bm", &BTreeMap::new(), DomainParams::default()).unwrap();
        let m = reference_exit_mean(&z.problem, 1.0 / 1024.0, 4.0, 20_000, 2).unwrap();
        assert!((m.mean.mean - 0.25).abs() < 3.0 * m.mean.stderr, "{m:?}");
        assert_eq!(m.horizon, 4.0);
    }

    #[test]
    fn pilot_horizon_is_on_the_coarse_grid() {
        let z = build("interval_bm", &BTreeMap::new(), DomainParams::default()).unwrap();
        let t = pilot_horizon(&z.problem, 1.0 / 64.0, 1.0 / 16.0, 1).unwrap();
        assert!(t > 1.5 && t < 3.5, "{t}");
        assert_eq!((t * 16.0).fract(), 0.0);
    }
}
