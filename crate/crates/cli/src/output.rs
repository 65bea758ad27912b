//! CSV and meta file writers.

use std::fmt::Write as _;

use eulerexit::estimate::McEstimate;
use eulerexit::harness::RateFit;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Mesh the value belongs to, if any.
    pub h: Option<f64>,
    pub n: usize,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub censor_bias_bound: Option<f64>,
}

impl Row {
    pub fn estimate(h: Option<f64>, metric: impl Into<String>, e: &McEstimate) -> Self {
        Self { h, n: e.n, metric: metric.into(), value: e.mean, stderr: e.stderr, ci: e.ci95, censor_bias_bound: None }
    }

    /// A derived quantity without sampling error attached.
    pub fn exact(h: Option<f64>, n: usize, metric: impl Into<String>, value: f64) -> Self {
        Self { h, n, metric: metric.into(), value, stderr: 0.0, ci: (value, value), censor_bias_bound: None }
    }

    pub fn with_censor_bias(mut self, bound: f64) -> Self {
        self.censor_bias_bound = Some(bound);
        self
    }
}

/// 17 significant digits, enough to recover every f64 exactly.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub const RESULTS_HEADER: &str = "h,n,metric,value,stderr,ci_lo,ci_hi,censor_bias_bound";

pub fn results_csv(rows: &[Row]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            opt(r.h),
            r.n,
            r.metric,
            float(r.value),
            float(r.stderr),
            float(r.ci.0),
            float(r.ci.1),
            opt(r.censor_bias_bound)
        );
    }
    s
}

pub const FIT_HEADER: &str = "metric,slope,intercept,r_squared,slope_stderr,dropped_coarsest";

pub fn fit_csv(fits: &[(String, RateFit)]) -> String {
    let mut s = String::from(FIT_HEADER);
    s.push('\n');
    for (metric, f) in fits {
        let _ = writeln!(
            s,
            "{metric},{},{},{},{},{}",
            float(f.slope),
            float(f.intercept),
            float(f.r_squared),
            float(f.slope_stderr),
            f.dropped_coarsest
        );
    }
    s
}
