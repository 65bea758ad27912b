//! Exit times of the distance process, on grids and in (approximate)
//! continuous time, with censoring at the grid horizon.

use crate::error::{param, Result};
use crate::model::{distance_coefficients, Problem};
use crate::simulate::{CounterRng, EulerPath, Tag};

/// An exit time or the marker that none occurred before the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitTime {
    Exited(f64),
    Censored,
}

impl ExitTime {
    pub fn is_censored(self) -> bool {
        matches!(self, ExitTime::Censored)
    }

    pub fn time(self) -> Option<f64> {
        match self {
            ExitTime::Exited(t) => Some(t),
            ExitTime::Censored => None,
        }
    }

    /// `theta ∧ T`; censored paths contribute `T`.
    pub fn capped(self, horizon: f64) -> f64 {
        match self {
            ExitTime::Exited(t) => t.min(horizon),
            ExitTime::Censored => horizon,
        }
    }
}

/// Reference and discrete exit of one coupled pair of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitRecord {
    pub theta_ref: ExitTime,
    pub theta_disc: ExitTime,
    pub x_at_theta_ref: Vec<f64>,
    pub x_at_theta_disc: Vec<f64>,
    pub start_time: f64,
    pub level: f64,
}

/// How the reference exit is located inside a fine step whose end points
/// are both above the level.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CrossingRule {
    /// Only steps ending at or below the level count.
    Interpolated,
    /// Also a Brownian-bridge crossing test with the frozen diffusion of the
    /// distance process. `a_bound_sq` bounds `|a|^2` from above.
    Bridge { a_bound_sq: f64 },
}

/// Beyond this exponent the bridge crossing probability is below the
/// smallest uniform the generator can return, so the test is skipped.
const BRIDGE_SKIP_EXPONENT: f64 = 38.0;

impl CrossingRule {
    /// Position of the crossing inside a step from `p0 > level` to `p1`, as
    /// a fraction of the step, or `None`. `a_sq` and `uniform` are only
    /// called when the bridge test is needed.
    #[inline]
    pub(crate) fn check(
        self,
        level: f64,
        p0: f64,
        p1: f64,
        dt: f64,
        a_sq: impl FnOnce() -> f64,
        uniform: impl FnOnce() -> f64,
    ) -> Option<f64> {
        if p1 <= level {
            return Some((p0 - level) / (p0 - p1));
        }
        match self {
            CrossingRule::Interpolated => None,
            CrossingRule::Bridge { a_bound_sq } => {
                let num = 2.0 * (p0 - level) * (p1 - level);
                if num >= BRIDGE_SKIP_EXPONENT * a_bound_sq * dt {
                    return None;
                }
                let a2 = a_sq();
                if !(a2 > 0.0) {
                    return None;
                }
                let prob = (-num / (a2 * dt)).exp();
                (uniform() < prob).then_some(0.5)
            }
        }
    }
}

/// First node `t >= tau` with distance at or below `level`.
pub fn discrete_exit(path: &EulerPath, level: f64, tau: f64) -> Result<ExitTime> {
    let Some(start) = path.grid().node_index(tau) else {
        return param("start time is not a grid node");
    };
    let nodes = path.grid().nodes();
    Ok(path.distance_samples()[start..]
        .iter()
        .position(|&p| p <= level)
        .map_or(ExitTime::Censored, |i| ExitTime::Exited(nodes[start + i])))
}

/// Reference exit: first fine node at or below `level`, with the crossing
/// time interpolated linearly in the distance samples.
pub fn reference_exit(fine: &EulerPath, level: f64, tau: f64) -> Result<ExitTime> {
    Ok(scan(fine, level, tau, CrossingRule::Interpolated, |_| 0.0, |_| 1.0)?.0)
}

/// Reference exit with an additional Brownian-bridge crossing test in every
/// fine step. The uniform for step `k` is draw `k` of the crossing stream of
/// `(seed, path_index)`; a bridge crossing is placed at the step midpoint.
/// `fine` must start at time zero so step indices are global.
pub fn reference_exit_bridge(
    problem: &Problem,
    fine: &EulerPath,
    level: f64,
    tau: f64,
    seed: u64,
    path_index: u64,
) -> Result<(ExitTime, Vec<f64>)> {
    let rng = CounterRng::new(seed);
    let lip = problem.lip();
    let rule = CrossingRule::Bridge { a_bound_sq: lip * lip };
    let a_sq = |k: usize| {
        let x = fine.state(k);
        let coeffs = distance_coefficients(&problem.model, &problem.domain, x, x);
        coeffs.a.iter().map(|v| v * v).sum::<f64>()
    };
    let uniform = |k: usize| rng.stream(path_index, Tag::Crossing, k as u64).uniform();
    scan(fine, level, tau, rule, a_sq, uniform)
}

fn scan(
    fine: &EulerPath,
    level: f64,
    tau: f64,
    rule: CrossingRule,
    a_sq: impl Fn(usize) -> f64,
    uniform: impl Fn(usize) -> f64,
) -> Result<(ExitTime, Vec<f64>)> {
    let Some(start) = fine.grid().node_index(tau) else {
        return param("start time is not a grid node");
    };
    let p = fine.distance_samples();
    let nodes = fine.grid().nodes();
    if p[start] <= level {
        return Ok((ExitTime::Exited(tau), fine.state(start).to_vec()));
    }
    for k in start..p.len() - 1 {
        if let Some(frac) = rule.check(level, p[k], p[k + 1], nodes[k + 1] - nodes[k], || a_sq(k), || uniform(k)) {
            let t = nodes[k] + frac * (nodes[k + 1] - nodes[k]);
            return Ok((ExitTime::Exited(t), lerp(fine.state(k), fine.state(k + 1), frac)));
        }
    }
    Ok((ExitTime::Censored, fine.state(p.len() - 1).to_vec()))
}

pub(crate) fn lerp(a: &[f64], b: &[f64], frac: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect()
}

/// Reference and discrete exits of a coupled pair with interpolated
/// reference crossing.
pub fn exit_record(coarse: &EulerPath, fine: &EulerPath, level: f64, tau: f64) -> Result<ExitRecord> {
    let theta_ref = reference_exit(fine, level, tau)?;
    let theta_disc = discrete_exit(coarse, level, tau)?;
    let mut record = ExitRecord {
        theta_ref,
        theta_disc,
        x_at_theta_ref: Vec::new(),
        x_at_theta_disc: Vec::new(),
        start_time: tau,
        level,
    };
    let (a, b) = stopped_positions(coarse, fine, &record)?;
    record.x_at_theta_ref = a;
    record.x_at_theta_disc = b;
    Ok(record)
}

/// Fine state at `theta_ref ∧ T` (interpolated between fine nodes) and
/// coarse state at `theta_disc ∧ T`.
pub fn stopped_positions(coarse: &EulerPath, fine: &EulerPath, record: &ExitRecord) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_ref = record.theta_ref.capped(fine.grid().horizon());
    let g = fine.grid();
    let k = g.floor_index(t_ref)?;
    let x_ref = if k + 1 < g.len() {
        let frac = (t_ref - g.nodes()[k]) / g.step(k);
        lerp(fine.state(k), fine.state(k + 1), frac)
    } else {
        fine.state(k).to_vec()
    };
    let t_disc = record.theta_disc.capped(coarse.grid().horizon());
    let Some(j) = coarse.grid().node_index(t_disc) else {
        return param("discrete exit time is not a coarse node");
    };
    Ok((x_ref, coarse.state(j).to_vec()))
}
