//! Monte Carlo statistics and empirical checks of the moment, tail,
//! crossing, modulus and strong-error bounds.

mod sampling;

pub use sampling::{
    crossing_probability, estimate_l_hat, modulus_tail, strong_euler_error, CrossingEstimate, LHat,
    ModulusEstimate, StrongError,
};

use crate::error::{param, Error, Result};

/// Sum with Neumaier compensation, in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean with its standard error and a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn new(mean: f64, stderr: f64, n: usize) -> Self {
        Self { mean, stderr, n, ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr) }
    }

    /// `g(mean)` with a delta-method standard error, given `g'(mean)`.
    pub fn map(&self, value: f64, derivative: f64) -> Self {
        Self::new(value, (derivative * self.stderr).abs(), self.n)
    }
}

/// Mean and standard error `s / sqrt(n)` with the unbiased sample variance.
pub fn mc_mean(samples: &[f64]) -> Result<McEstimate> {
    let n = samples.len();
    if n < 2 {
        return param("at least two samples are required");
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
    let var = ss / (n - 1) as f64;
    Ok(McEstimate::new(mean, (var / n as f64).sqrt(), n))
}

/// Which exit time a profile was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Continuous,
    Discrete,
}

/// Raw moment `E[(theta - tau)^p]` and its `p`-th root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentProfile {
    pub p: u32,
    pub raw: McEstimate,
    /// `raw^(1/p)` with standard error.
    pub root: McEstimate,
    pub source: Source,
}

/// Below this many samples the root's standard error is a jackknife.
const JACKKNIFE_BELOW: usize = 1000;

pub fn moment_profile(samples: &[f64], p: u32, source: Source) -> Result<MomentProfile> {
    if p == 0 {
        return param("moment order must be at least 1");
    }
    if let Some(x) = samples.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::Data(format!("exit samples must be finite and nonnegative, got {x}")));
    }
    let powered: Vec<f64> = samples.iter().map(|x| x.powi(p as i32)).collect();
    let raw = mc_mean(&powered)?;
    let inv = 1.0 / p as f64;
    let value = raw.mean.powf(inv);
    let root = if samples.len() >= JACKKNIFE_BELOW {
        let slope = if raw.mean > 0.0 { inv * raw.mean.powf(inv - 1.0) } else { 0.0 };
        raw.map(value, slope)
    } else {
        let n = powered.len() as f64;
        let total = compensated_sum(powered.iter().copied());
        let loo: Vec<f64> = powered.iter().map(|x| ((total - x) / (n - 1.0)).max(0.0).powf(inv)).collect();
        let m = compensated_sum(loo.iter().copied()) / n;
        let var = (n - 1.0) / n * compensated_sum(loo.iter().map(|v| (v - m) * (v - m)));
        McEstimate::new(value, var.sqrt(), raw.n)
    };
    Ok(MomentProfile { p, raw, root, source })
}

fn factorial(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

/// One line of the moment recursion check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub p: u32,
    pub lhs: McEstimate,
    /// `p! L^(p-1) E[theta]`.
    pub bound: f64,
    /// `p p! L^(p-1) E[theta]`, the literal reading of the constant.
    pub loose_bound: f64,
    /// Three combined standard errors.
    pub margin: f64,
    pub passed: bool,
    pub passed_loose: bool,
}

/// `E[theta^p] <= p! L^(p-1) E[theta]` for each profile with `p >= 2`, with a
/// three standard error margin. The `p = 1` profile must be present.
pub fn check_moment_recursion(profiles: &[MomentProfile], l_hat: f64) -> Result<Vec<RecursionCheck>> {
    if !(l_hat > 0.0) {
        return param("L_hat must be positive");
    }
    let Some(first) = profiles.iter().find(|m| m.p == 1) else {
        return param("the first moment is required");
    };
    Ok(profiles
        .iter()
        .filter(|m| m.p >= 2)
        .map(|m| {
            let c = factorial(m.p) * l_hat.powi(m.p as i32 - 1);
            let bound = c * first.raw.mean;
            let margin = 3.0 * (m.raw.stderr.powi(2) + (c * first.raw.stderr).powi(2)).sqrt();
            let loose_c = m.p as f64 * c;
            let loose_margin = 3.0 * (m.raw.stderr.powi(2) + (loose_c * first.raw.stderr).powi(2)).sqrt();
            RecursionCheck {
                p: m.p,
                lhs: m.raw,
                bound,
                loose_bound: loose_c * first.raw.mean,
                margin,
                passed: m.raw.mean <= bound + margin,
                passed_loose: m.raw.mean <= loose_c * first.raw.mean + loose_margin,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMomentCheck {
    pub c: f64,
    pub estimate: McEstimate,
    /// `(1 - c L)^-1`.
    pub bound: f64,
    pub passed: bool,
}

/// `E[exp(c theta)] <= (1 - c L)^-1` with a three standard error margin.
pub fn check_exponential_moment(samples: &[f64], l_hat: f64, c: f64) -> Result<ExpMomentCheck> {
    if !(l_hat > 0.0) {
        return param("L_hat must be positive");
    }
    if !(c >= 0.0) || c * l_hat >= 1.0 {
        return param("c must lie in [0, 1/L_hat)");
    }
    let values: Vec<f64> = samples.iter().map(|t| (c * t).exp()).collect();
    let estimate = mc_mean(&values)?;
    let bound = 1.0 / (1.0 - c * l_hat);
    Ok(ExpMomentCheck { c, estimate, bound, passed: estimate.mean <= bound + 3.0 * estimate.stderr })
}

/// Empirical survival function on the lattice `k * unit`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    pub unit: f64,
    /// `(k, P(theta >= k unit), count)` until the first empty cell.
    pub survival: Vec<(usize, f64, usize)>,
    /// Exponential decay rate per unit time, fitted where counts are at
    /// least 50 and `k >= 1`.
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
    /// `(c, alpha)` with `c = 2 E[theta]` and `alpha = P(theta >= c)`.
    pub escape_pair: (f64, f64),
}

/// Minimum count for a survival cell to enter the tail fit.
const TAIL_MIN_COUNT: usize = 50;

pub fn exit_tail(samples: &[f64], unit: f64) -> Result<TailTable> {
    if samples.is_empty() {
        return Err(Error::Data("no exit samples".into()));
    }
    if !(unit > 0.0) {
        return param("tail unit must be positive");
    }
    let n = samples.len();
    let mut survival = Vec::new();
    for k in 0.. {
        let t = k as f64 * unit;
        let count = samples.iter().filter(|&&x| x >= t).count();
        survival.push((k, count as f64 / n as f64, count));
        if count == 0 {
            break;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = survival
        .iter()
        .filter(|(k, _, c)| *k >= 1 && *c >= TAIL_MIN_COUNT)
        .map(|(k, s, _)| (*k as f64 * unit, s.ln()))
        .unzip();
    let (beta, r_squared) = if xs.len() >= 3 {
        let fit = crate::harness::least_squares(&xs, &ys)?;
        (Some(-fit.slope), Some(fit.r_squared))
    } else {
        (None, None)
    };
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let c = 2.0 * mean;
    let alpha = samples.iter().filter(|&&x| x >= c).count() as f64 / n as f64;
    Ok(TailTable { unit, survival, beta, r_squared, escape_pair: (c, alpha) })
}
