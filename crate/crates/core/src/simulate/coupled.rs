//! Multi-level Euler paths and a fine reference path on one Brownian path,
//! generated block by block.
//!
//! The coarsest mesh `H` sets the block length. Each block draws one
//! Gaussian increment, bridge-fills it down to the reference mesh and then
//! advances the reference and every level. Intermediate levels see chunk
//! sums of the fine increments, so every level is the Euler scheme of the
//! same Brownian path. The draws are addressed exactly as in
//! [`sample_increments`](super::sample_increments) followed by
//! [`refine`](super::refine) with `sub_seed = seed`, which makes the results
//! bit-identical to building the paths one by one.

use rayon::prelude::*;

use super::driver::{bridge_fill, bridge_table};
use super::euler::EulerStepper;
use super::rng::{CounterRng, Tag};
use crate::error::{param, Error, Result};
use crate::exit::{lerp, CrossingRule, ExitTime};
use crate::grid::TimeGrid;
use crate::model::{a_norm_sq, Problem};

/// Reference path handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// No reference path; only the levels are simulated.
    Off,
    /// Reference exit at the first fine node below the level, interpolated.
    Interpolated,
    /// As `Interpolated` plus a Brownian-bridge crossing test per fine step.
    Bridge,
}

/// What to follow along each path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Track {
    /// Stop every path at its exit.
    Exit,
    /// Run to the horizon and record sup-norm path errors and one-step
    /// moduli; no exits.
    Path,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledConfig {
    /// Level meshes, strictly decreasing. Each must divide the first.
    pub meshes: Vec<f64>,
    /// Reference mesh is the finest mesh divided by this.
    pub ref_factor: usize,
    /// Rounded to a whole number of coarsest steps.
    pub horizon: f64,
    /// Exit level `l`.
    pub level: f64,
    pub reference: ReferenceMode,
    pub track: Track,
    pub seed: u64,
}

/// Validated block structure of a [`CoupledConfig`].
#[derive(Debug, Clone)]
pub struct Layout {
    config: CoupledConfig,
    coarse: f64,
    blocks: usize,
    fine_per_block: usize,
    level_factors: Vec<usize>,
    table: Vec<(f64, f64)>,
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * n && n >= 1.0).then_some(n as usize)
}

impl Layout {
    pub fn new(config: &CoupledConfig) -> Result<Self> {
        let m = &config.meshes;
        if m.is_empty() {
            return param("at least one mesh is required");
        }
        for &h in m {
            if !(h > 0.0) {
                return param("mesh must be positive");
            }
            if h > 1.0 {
                return param("mesh exceeds 1");
            }
        }
        if m.windows(2).any(|w| w[1] >= w[0]) {
            return param("meshes must be strictly decreasing");
        }
        let coarse = m[0];
        let ratios = m
            .iter()
            .map(|&h| integer_ratio(coarse, h))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parameter("every mesh must divide the coarsest".into()))?;
        let finest = *ratios.last().expect("nonempty");
        if ratios.iter().any(|r| finest % r != 0) {
            return param("every mesh must be a multiple of the finest");
        }
        // without a reference the fine grid is only needed for path tracking
        let ref_factor = match (config.reference, config.track) {
            (ReferenceMode::Off, Track::Exit) => 1,
            _ => config.ref_factor,
        };
        if ref_factor == 0 {
            return param("reference factor must be positive");
        }
        let fine_per_block = finest * ref_factor;
        let blocks = integer_ratio(config.horizon, coarse)
            .ok_or_else(|| Error::Parameter("horizon must be a whole number of coarsest steps".into()))?;
        Ok(Self {
            config: config.clone(),
            coarse,
            blocks,
            fine_per_block,
            level_factors: ratios.iter().map(|r| fine_per_block / r).collect(),
            table: bridge_table(fine_per_block),
        })
    }

    pub fn config(&self) -> &CoupledConfig {
        &self.config
    }

    /// Resolved horizon, a node of the coarsest grid.
    pub fn horizon(&self) -> f64 {
        self.blocks as f64 * self.coarse
    }

    pub fn coarse_grid(&self) -> TimeGrid {
        TimeGrid::uniform(self.coarse, self.horizon()).expect("validated")
    }

    /// Fine grid: the coarsest grid refined `fine_per_block` times.
    pub fn fine_grid(&self) -> TimeGrid {
        let g = self.coarse_grid();
        if self.fine_per_block == 1 {
            g
        } else {
            g.refine(self.fine_per_block).expect("validated")
        }
    }

    pub fn fine_per_block(&self) -> usize {
        self.fine_per_block
    }

    /// Fine steps per step of each level.
    pub fn level_factors(&self) -> &[usize] {
        &self.level_factors
    }

    pub fn fine_mesh(&self) -> f64 {
        self.coarse / self.fine_per_block as f64
    }

    /// Same arithmetic as `TimeGrid::refine` on the uniform coarsest grid.
    #[inline]
    fn fine_time(&self, t_b: f64, t_next: f64, sub: f64, m: usize) -> f64 {
        if m == self.fine_per_block {
            t_next
        } else {
            t_b + m as f64 * sub
        }
    }
}

/// Exit time and stopped state of the reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct Stopped {
    pub exit: ExitTime,
    /// State at `theta ∧ T`.
    pub position: Vec<f64>,
}

/// Per-level results for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    pub exit: ExitTime,
    /// State at `theta^pi ∧ T`.
    pub position: Vec<f64>,
    /// `|P - Pbar|` at the first fine node at or after
    /// `theta_ref ∧ theta^pi ∧ T`; NaN without a reference.
    pub gap: f64,
    /// `sup |X - Xbar|` over fine nodes (path tracking only).
    pub sup_error: f64,
    /// `sup |Xbar_t - Xbar_{phi_t}|` over fine nodes (path tracking only).
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub reference: Option<Stopped>,
    pub levels: Vec<LevelOutcome>,
}

struct LevelState {
    x: Vec<f64>,
    phi_x: Vec<f64>,
    stepper: EulerStepper,
    done: bool,
    out: LevelOutcome,
    gap_set: bool,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Simulates path `path_index` of the coupled family described by `layout`.
pub fn simulate_coupled(problem: &Problem, layout: &Layout, path_index: u64) -> Result<CoupledPath> {
    run(problem, layout, path_index, true)
}

/// Reference path alone, stopping at its exit. Identical to the `reference`
/// field of [`simulate_coupled`], without the cost of the discrete levels.
pub fn simulate_reference(problem: &Problem, layout: &Layout, path_index: u64) -> Result<Stopped> {
    if layout.config.reference == ReferenceMode::Off || layout.config.track == Track::Path {
        return param("reference-only runs need a reference and exit tracking");
    }
    Ok(run(problem, layout, path_index, false)?.reference.expect("reference is on"))
}

fn run(problem: &Problem, layout: &Layout, path_index: u64, with_levels: bool) -> Result<CoupledPath> {
    let cfg = &layout.config;
    let (model, domain) = (&problem.model, &problem.domain);
    let d = model.dim();
    let level = cfg.level;
    let track_path = cfg.track == Track::Path;
    let has_ref = cfg.reference != ReferenceMode::Off;
    let rule = match cfg.reference {
        ReferenceMode::Bridge => CrossingRule::Bridge { a_bound_sq: problem.lip() * problem.lip() },
        _ => CrossingRule::Interpolated,
    };
    let rng = CounterRng::new(cfg.seed);
    let x0 = model.x0();
    let p0 = domain.delta(x0);
    let n_levels = if with_levels { cfg.meshes.len() } else { 0 };

    if !track_path && p0 <= level {
        let at_start = || LevelOutcome {
            exit: ExitTime::Exited(0.0),
            position: x0.to_vec(),
            gap: if has_ref { 0.0 } else { f64::NAN },
            sup_error: f64::NAN,
            modulus: f64::NAN,
        };
        return Ok(CoupledPath {
            reference: has_ref.then(|| Stopped { exit: ExitTime::Exited(0.0), position: x0.to_vec() }),
            levels: (0..n_levels).map(|_| at_start()).collect(),
        });
    }

    let f = layout.fine_per_block;
    let mut dw = vec![0.0; f * d];
    let mut totals = vec![0.0; d];
    let mut ref_p = vec![0.0; f + 1];
    let mut ref_states = if track_path && has_ref { vec![0.0; (f + 1) * d] } else { Vec::new() };
    let mut ref_x = x0.to_vec();
    let mut ref_prev = vec![0.0; d];
    let mut ref_last_p = p0;
    let mut ref_stepper = EulerStepper::new(d);
    let mut ref_exit: Option<(f64, usize)> = None;
    let mut ref_position = Vec::new();
    let mut grad = vec![0.0; d];
    let mut cross_buf = vec![0.0; f];
    let mut cross_block = usize::MAX;

    let mut levels: Vec<LevelState> = (0..n_levels)
        .map(|_| LevelState {
            x: x0.to_vec(),
            phi_x: vec![0.0; d],
            stepper: EulerStepper::new(d),
            done: false,
            out: LevelOutcome {
                exit: ExitTime::Censored,
                position: Vec::new(),
                gap: f64::NAN,
                sup_error: if track_path && has_ref { 0.0 } else { f64::NAN },
                modulus: if track_path { 0.0 } else { f64::NAN },
            },
            gap_set: !has_ref || track_path,
        })
        .collect();
    let mut wsum = vec![0.0; d];
    let mut xc = vec![0.0; d];

    for b in 0..layout.blocks {
        let ref_active = has_ref && ref_exit.is_none();
        if !track_path && !ref_active && levels.iter().all(|l| l.done) {
            break;
        }
        let t_b = b as f64 * layout.coarse;
        let t_next = (b + 1) as f64 * layout.coarse;
        let step = t_next - t_b;
        let sub = step / f as f64;
        let base = (b * f) as u64;

        let mut inc = rng.stream(path_index, Tag::Increments, (b * d) as u64);
        let scale = step.sqrt();
        for t in totals.iter_mut() {
            *t = scale * inc.normal();
        }
        if f == 1 {
            dw.copy_from_slice(&totals);
        } else {
            let sqrt_sub = (step / f as f64).sqrt();
            for j in 0..d {
                let mut draws = rng.stream(path_index, Tag::Bridge, ((b * d + j) * (f - 1)) as u64);
                bridge_fill(totals[j], sqrt_sub, &layout.table, &mut draws, &mut dw[j..], d);
            }
        }

        // reference first, so that the levels can read its distances
        if ref_active || (track_path && has_ref) {
            ref_p[0] = ref_last_p;
            if track_path {
                ref_states[..d].copy_from_slice(&ref_x);
            }
            let mut t0 = t_b;
            for m in 0..f {
                let t1 = layout.fine_time(t_b, t_next, sub, m + 1);
                let dt = t1 - t0;
                std::mem::swap(&mut ref_prev, &mut ref_x);
                ref_stepper.freeze(model, &ref_prev);
                ref_stepper.advance_from(&ref_prev, dt, &dw[m * d..(m + 1) * d], &mut ref_x);

                if track_path {
                    ref_states[(m + 1) * d..(m + 2) * d].copy_from_slice(&ref_x);
                } else {
                    let p1 = domain.delta(&ref_x);
                    ref_p[m + 1] = p1;
                    let p_prev = ref_p[m];
                    let crossed = rule.check(
                        level,
                        p_prev,
                        p1,
                        dt,
                        || {
                            domain.grad_delta(&ref_prev, &mut grad);
                            a_norm_sq(&grad, &ref_stepper.sigma, d)
                        },
                        || {
                            // a positioned stream costs a keystream refill, so
                            // the block's uniforms are drawn together
                            if cross_block != b {
                                let mut u = rng.stream(path_index, Tag::Crossing, base);
                                cross_buf.iter_mut().for_each(|v| *v = u.uniform());
                                cross_block = b;
                            }
                            cross_buf[m]
                        },
                    );
                    if let Some(frac) = crossed {
                        if ref_x.iter().chain(&ref_prev).any(|v| !v.is_finite()) {
                            return Err(Error::BlowUp { node: base as usize + m + 1 });
                        }
                        ref_exit = Some((t0 + frac * dt, base as usize + m + 1));
                        ref_position = lerp(&ref_prev, &ref_x, frac);
                        break;
                    }
                }
                t0 = t1;
            }
            // checked once per block; the per-step test cost a tenth of the loop
            if ref_exit.is_none() && ref_x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { node: base as usize + f });
            }
            ref_last_p = ref_p[f];
        }
        let ref_node = ref_exit.map(|(_, n)| n);

        for (i, st) in levels.iter_mut().enumerate() {
            if st.done {
                continue;
            }
            let lf = layout.level_factors[i];
            for s in 0..f / lf {
                let (m0, m1) = (s * lf, (s + 1) * lf);
                let t0 = layout.fine_time(t_b, t_next, sub, m0);
                let t1 = layout.fine_time(t_b, t_next, sub, m1);
                let g0 = base as usize + m0;
                let g1 = base as usize + m1;
                st.stepper.freeze(model, &st.x);
                let interior_gap = !st.gap_set && ref_node.is_some_and(|n| n > g0 && n < g1);
                wsum.fill(0.0);
                if track_path || interior_gap {
                    st.phi_x.copy_from_slice(&st.x);
                    for m in m0..m1 {
                        for j in 0..d {
                            wsum[j] += dw[m * d + j];
                        }
                        let node = m + 1;
                        let t = layout.fine_time(t_b, t_next, sub, node);
                        st.stepper.interpolate(&st.phi_x, t - t0, &wsum, &mut xc);
                        if track_path {
                            st.out.modulus = st.out.modulus.max(norm_diff(&xc, &st.phi_x));
                            if has_ref && node < m1 {
                                let r = &ref_states[node * d..(node + 1) * d];
                                st.out.sup_error = st.out.sup_error.max(norm_diff(r, &xc));
                            }
                        } else if Some(base as usize + node) == ref_node && node < m1 {
                            st.out.gap = (ref_p[node] - domain.delta(&xc)).abs();
                            st.gap_set = true;
                        }
                    }
                } else {
                    for m in m0..m1 {
                        for j in 0..d {
                            wsum[j] += dw[m * d + j];
                        }
                    }
                }
                st.stepper.advance(&mut st.x, t1 - t0, &wsum);
                if st.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { node: g1 });
                }
                if track_path {
                    if has_ref {
                        let r = &ref_states[m1 * d..(m1 + 1) * d];
                        st.out.sup_error = st.out.sup_error.max(norm_diff(r, &st.x));
                    }
                    continue;
                }
                let p1 = domain.delta(&st.x);
                let exited = p1 <= level;
                if !st.gap_set && (ref_node == Some(g1) || exited) {
                    st.out.gap = (ref_p[m1] - p1).abs();
                    st.gap_set = true;
                }
                if exited {
                    st.out.exit = ExitTime::Exited(t1);
                    st.out.position = st.x.clone();
                    st.done = true;
                    break;
                }
            }
        }
    }

    for st in levels.iter_mut() {
        if !st.done {
            st.out.position = st.x.clone();
            if !st.gap_set {
                st.out.gap = (ref_last_p - domain.delta(&st.x)).abs();
            }
        }
    }
    let reference = has_ref.then(|| match ref_exit {
        Some((t, _)) => Stopped { exit: ExitTime::Exited(t), position: ref_position },
        None => Stopped { exit: ExitTime::Censored, position: ref_x.clone() },
    });
    Ok(CoupledPath { reference, levels: levels.into_iter().map(|l| l.out).collect() })
}

/// Paths `0..n` in parallel on the current rayon pool, returned in index
/// order.
pub fn simulate_many(problem: &Problem, layout: &Layout, n: usize) -> Result<Vec<CoupledPath>> {
    (0..n as u64).into_par_iter().map(|p| simulate_coupled(problem, layout, p)).collect()
}

/// [`simulate_reference`] for paths `0..n`, in index order.
pub fn simulate_reference_many(problem: &Problem, layout: &Layout, n: usize) -> Result<Vec<Stopped>> {
    (0..n as u64).into_par_iter().map(|p| simulate_reference(problem, layout, p)).collect()
}
