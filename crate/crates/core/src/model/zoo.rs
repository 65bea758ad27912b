//! Built-in models addressed by string id.

use std::collections::BTreeMap;

use super::{
    max_radius, Clamp, ClampedShape, Domain, FnDynamics, Problem, SdeModel, Shape,
};
use crate::error::{param, Error, Result};

/// Ids accepted by [`build`].
pub const MODEL_IDS: [&str; 5] = ["bm_ball", "interval_bm", "ou_interval", "time_band", "gbm_clamped"];

/// Domain options shared by every zoo model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DomainParams {
    /// Non-characteristic radius; default `0.96 * L^-3 / 4`.
    pub r: Option<f64>,
    /// Width of the band where the distance is exact; default `2 r`.
    pub clamp_band: Option<f64>,
}

/// A built model plus the auxiliary data the experiments need.
#[derive(Debug, Clone)]
pub struct ZooModel {
    pub id: &'static str,
    /// All parameters, defaults filled in.
    pub params: BTreeMap<String, f64>,
    pub r: f64,
    pub clamp_band: f64,
    pub problem: Problem,
    /// Starting points over which the mean exit time is maximised.
    pub start_family: Vec<Vec<f64>>,
    /// Direction from `x0` towards the boundary used to place starts at a
    /// prescribed distance.
    pub boundary_direction: Vec<f64>,
    /// Points on the boundary.
    pub boundary_starts: Vec<Vec<f64>>,
    /// Known `E[theta]` from `x0`, when available.
    pub exact_mean: Option<f64>,
    /// Zero drift in the distance process at the boundary.
    pub driftless: bool,
}

fn defaults(id: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match id {
        "bm_ball" => &[("d", 2.0), ("radius", 1.0), ("x0", 0.0)],
        "interval_bm" => &[("z0", 0.75), ("x0", 0.0)],
        "ou_interval" => &[("kappa", 1.0), ("sigma", 1.0), ("c", 0.5), ("x0", 0.0)],
        "time_band" => &[("c0", 0.75), ("speed", 0.25), ("t0", 0.0), ("x0", 0.0)],
        "gbm_clamped" => &[("mu", 0.1), ("sigma", 0.2), ("cap", 4.0), ("lo", 0.6), ("hi", 1.6), ("x0", 1.0)],
        _ => return None,
    })
}

/// Parameter names accepted by a model id.
pub fn param_names(id: &str) -> Option<Vec<&'static str>> {
    defaults(id).map(|d| d.iter().map(|(k, _)| *k).collect())
}

fn resolve(id: &str, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let Some(defs) = defaults(id) else {
        return param(format!("unknown model id '{id}'"));
    };
    let mut out: BTreeMap<String, f64> = defs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            return param(format!("unknown parameter '{k}' for model '{id}'"));
        }
        if !v.is_finite() {
            return param(format!("parameter '{k}' must be finite"));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

/// Builds a zoo model. Unknown ids and parameter names are errors.
pub fn build(id: &str, params: &BTreeMap<String, f64>, domain: DomainParams) -> Result<ZooModel> {
    let p = resolve(id, params)?;
    let id = MODEL_IDS.iter().copied().find(|m| *m == id).expect("resolved ids are known");
    match id {
        "bm_ball" => bm_ball(p, domain),
        "interval_bm" => interval_bm(p, domain),
        "ou_interval" => ou_interval(p, domain),
        "time_band" => time_band(p, domain),
        _ => gbm_clamped(p, domain),
    }
}

/// `(r, clamp)` from the options and the declared constant.
fn radius_and_clamp(lip: f64, opts: DomainParams) -> Result<(f64, Clamp)> {
    let r = opts.r.unwrap_or(0.96 * max_radius(lip));
    let band = opts.clamp_band.unwrap_or(2.0 * r);
    if !(band >= r) {
        return param("clamp band must be at least r");
    }
    Ok((r, Clamp { band, width: band }))
}

fn identity_diffusion(d: usize) -> impl Fn(&[f64], &mut [f64]) + Send + Sync {
    // written entry by entry; a fill becomes a memset call, slow at d = 1
    move |_x, out| {
        let mut next = 0;
        for (k, v) in out.iter_mut().enumerate() {
            *v = if k == next { 1.0 } else { 0.0 };
            if k == next {
                next += d + 1;
            }
        }
    }
}

fn zero_drift(_x: &[f64], out: &mut [f64]) {
    for v in out {
        *v = 0.0;
    }
}

fn interval_domain(lo: f64, hi: f64, lip: f64, opts: DomainParams) -> Result<(Domain, f64, Clamp)> {
    let (r, clamp) = radius_and_clamp(lip, opts)?;
    if (hi - lo) / 2.0 <= clamp.band + clamp.width {
        return param("interval too short for the clamp band");
    }
    let shape = ClampedShape::new(Shape::Interval { lo, hi }, Some(clamp));
    let hb = shape.hessian_bound();
    let pad = clamp.band + clamp.width;
    Ok((Domain::new(shape, r, 1.0, hb, (vec![lo - pad], vec![hi + pad]))?, r, clamp))
}

fn finish(
    id: &'static str,
    params: BTreeMap<String, f64>,
    r: f64,
    clamp: Clamp,
    problem: Problem,
    start_family: Vec<Vec<f64>>,
    boundary_direction: Vec<f64>,
    boundary_rays: Vec<(Vec<f64>, Vec<f64>)>,
    exact_mean: Option<f64>,
    driftless: bool,
) -> Result<ZooModel> {
    let boundary_starts = boundary_rays
        .iter()
        .map(|(from, dir)| start_at_distance(&problem.domain, from, dir, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZooModel {
        id,
        params,
        r,
        clamp_band: clamp.band,
        problem,
        start_family,
        boundary_direction,
        boundary_starts,
        exact_mean,
        driftless,
    })
}

fn interval_bm(p: BTreeMap<String, f64>, opts: DomainParams) -> Result<ZooModel> {
    let (z0, x0) = (p["z0"], p["x0"]);
    if !(z0 < 1.0) {
        return param("z0 must be below 1");
    }
    let c = (1.0 - z0).sqrt();
    let lip = 2.0;
    let model = SdeModel::new(FnDynamics::new(1, zero_drift, identity_diffusion(1)).with_constant_coefficients(), 1.0, 1.0, lip, vec![x0])?;
    let (domain, r, clamp) = interval_domain(-c, c, lip, opts)?;
    let problem = Problem::new(model, domain)?;
    let family = vec![vec![x0], vec![-0.5 * c], vec![0.0], vec![0.5 * c]];
    let rays = vec![(vec![x0], vec![1.0]), (vec![x0], vec![-1.0])];
    finish("interval_bm", p, r, clamp, problem, family, vec![1.0], rays, Some(c * c - x0 * x0), true)
}

fn bm_ball(p: BTreeMap<String, f64>, opts: DomainParams) -> Result<ZooModel> {
    let (d_f, radius, x0) = (p["d"], p["radius"], p["x0"]);
    if !(d_f >= 1.0) || d_f.fract() != 0.0 || d_f > 64.0 {
        return param("d must be an integer in 1..=64");
    }
    if !(radius > 0.0) {
        return param("radius must be positive");
    }
    let d = d_f as usize;
    let lip = (d as f64).sqrt().max(2.0);
    let mut start = vec![0.0; d];
    start[0] = x0;
    let model = SdeModel::new(FnDynamics::new(d, zero_drift, identity_diffusion(d)).with_constant_coefficients(), 1.0, 1.0, lip, start.clone())?;
    let (r, clamp) = radius_and_clamp(lip, opts)?;
    if radius <= clamp.band + clamp.width {
        return param("radius too small for the clamp band");
    }
    let shape = ClampedShape::new(Shape::Ball { center: vec![0.0; d], radius }, Some(clamp));
    let hb = shape.hessian_bound();
    let pad = radius + clamp.band + clamp.width;
    let domain = Domain::new(shape, r, 1.0, hb, (vec![-pad; d], vec![pad; d]))?;
    let problem = Problem::new(model, domain)?;

    let axis = |v: f64| {
        let mut z = vec![0.0; d];
        z[0] = v;
        z
    };
    let family = vec![start.clone(), axis(0.0), axis(0.5 * radius)];
    let rays = if d == 1 {
        vec![(start.clone(), vec![1.0]), (start.clone(), vec![-1.0])]
    } else {
        (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::FRAC_PI_4;
                let mut dir = vec![0.0; d];
                dir[0] = a.cos();
                dir[1] = a.sin();
                (vec![0.0; d], dir)
            })
            .collect()
    };
    let mean = (radius * radius - x0 * x0) / d as f64;
    finish("bm_ball", p, r, clamp, problem, family, axis(1.0), rays, Some(mean), true)
}

fn ou_interval(p: BTreeMap<String, f64>, opts: DomainParams) -> Result<ZooModel> {
    let (kappa, sigma, c, x0) = (p["kappa"], p["sigma"], p["c"], p["x0"]);
    if !(kappa > 0.0) || !(sigma > 0.0) || !(c > 0.0) {
        return param("kappa, sigma and c must be positive");
    }
    // The drift is capped at |x| = c so that it stays bounded.
    let drift = move |x: &[f64], out: &mut [f64]| out[0] = -kappa * x[0].clamp(-c, c);
    let diffusion = move |_x: &[f64], out: &mut [f64]| out[0] = sigma;
    let lip = ceil2([2.0, kappa, kappa * c + sigma, 2.0 / sigma].into_iter().fold(1.0, f64::max));
    let model = SdeModel::new(FnDynamics::new(1, drift, diffusion), kappa, 1.0, lip, vec![x0])?;
    let (domain, r, clamp) = interval_domain(-c, c, lip, opts)?;
    let problem = Problem::new(model, domain)?;
    let family = vec![vec![x0], vec![-0.5 * c], vec![0.0], vec![0.5 * c]];
    let rays = vec![(vec![x0], vec![1.0]), (vec![x0], vec![-1.0])];
    finish("ou_interval", p, r, clamp, problem, family, vec![1.0], rays, None, false)
}

fn time_band(p: BTreeMap<String, f64>, opts: DomainParams) -> Result<ZooModel> {
    let (c0, speed, t0, x0) = (p["c0"], p["speed"], p["t0"], p["x0"]);
    if !(c0 > 0.0) || !(speed > 0.0) {
        return param("c0 and speed must be positive");
    }
    if !(t0 >= 0.0) {
        return param("t0 must be nonnegative");
    }
    let drift = |_x: &[f64], out: &mut [f64]| {
        out[0] = 1.0;
        out[1] = 0.0;
    };
    let diffusion = |_x: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        out[3] = 1.0;
    };
    let norm = (1.0 + speed * speed).sqrt();
    let lip = ceil2(2.0 * norm);
    let model = SdeModel::new(FnDynamics::new(2, drift, diffusion).with_constant_coefficients(), 1.0, 1.0, lip, vec![t0, x0])?;
    let (r, clamp) = radius_and_clamp(lip, opts)?;
    let shape = ClampedShape::new(Shape::ShrinkingBand { c0, speed }, Some(clamp));
    let hb = shape.hessian_bound();
    let t_end = c0 / speed;
    let pad = clamp.band + clamp.width;
    let domain = Domain::new(shape, r, 1.0, hb, (vec![0.0, -c0 - pad], vec![t_end, c0 + pad]))?;
    let problem = Problem::new(model, domain)?;
    let family = vec![vec![t0, x0], vec![0.0, 0.0], vec![0.0, 0.5 * c0]];
    let rays = [0.0, 0.5, 1.0]
        .iter()
        .flat_map(|&t| [(vec![t, 0.0], vec![0.0, 1.0]), (vec![t, 0.0], vec![0.0, -1.0])])
        .collect();
    finish("time_band", p, r, clamp, problem, family, vec![0.0, 1.0], rays, None, false)
}

fn gbm_clamped(p: BTreeMap<String, f64>, opts: DomainParams) -> Result<ZooModel> {
    let (m, s, cap, lo, hi, x0) = (p["mu"], p["sigma"], p["cap"], p["lo"], p["hi"], p["x0"]);
    if !(m > 0.0) || !(s > 0.0) || !(cap > 0.0) {
        return param("mu, sigma and cap must be positive");
    }
    if !(0.0 < lo && lo < hi && hi <= cap) {
        return param("need 0 < lo < hi <= cap");
    }
    let drift = move |x: &[f64], out: &mut [f64]| out[0] = m * x[0].clamp(0.0, cap);
    let diffusion = move |x: &[f64], out: &mut [f64]| out[0] = s * x[0].clamp(0.0, cap);
    let lip = [1.0, (m + s) * cap, 2.0 / (s * lo)].into_iter().fold(1.0, f64::max).ceil();
    let model = SdeModel::new(FnDynamics::new(1, drift, diffusion), m, s, lip, vec![x0])?;
    let (domain, r, clamp) = interval_domain(lo, hi, lip, opts)?;
    let problem = Problem::new(model, domain)?;
    let mid = 0.5 * (lo + hi);
    let family = vec![vec![x0], vec![mid]];
    let rays = vec![(vec![mid], vec![1.0]), (vec![mid], vec![-1.0])];
    finish("gbm_clamped", p, r, clamp, problem, family, vec![1.0], rays, None, false)
}

fn ceil2(v: f64) -> f64 {
    (v * 100.0).ceil() / 100.0
}

/// Point on the ray `from + s * direction` (s >= 0) where the distance first
/// falls to `target`, located by marching and bisection.
pub fn start_at_distance(domain: &Domain, from: &[f64], direction: &[f64], target: f64) -> Result<Vec<f64>> {
    let d = domain.dim();
    if from.len() != d || direction.len() != d {
        return param("start construction: dimension mismatch");
    }
    let len = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(len > 0.0) {
        return param("start construction: zero direction");
    }
    let dir: Vec<f64> = direction.iter().map(|v| v / len).collect();
    let at = |s: f64| -> Vec<f64> { from.iter().zip(&dir).map(|(z, u)| z + s * u).collect() };
    let (lo_box, hi_box) = &domain.bounding_box;
    let extent = lo_box.iter().zip(hi_box).map(|(a, b)| b - a).fold(0.0, f64::max);
    if !(domain.delta(from) > target) {
        return param("start construction: origin is not farther than the target distance");
    }
    let step = 1e-3 * extent;
    let mut s_in = 0.0;
    let mut s_out = None;
    for k in 1..=4000 {
        let s = k as f64 * step;
        if domain.delta(&at(s)) <= target {
            s_out = Some(s);
            break;
        }
        s_in = s;
    }
    let Some(mut s_out) = s_out else {
        return Err(Error::Parameter("start construction leaves the band".into()));
    };
    for _ in 0..200 {
        let mid = 0.5 * (s_in + s_out);
        if mid <= s_in || mid >= s_out {
            break;
        }
        if domain.delta(&at(mid)) > target {
            s_in = mid;
        } else {
            s_out = mid;
        }
    }
    // the inside end is returned so that a zero target gives a point with
    // delta >= 0 up to rounding
    Ok(at(s_in))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_lipschitz, check_noncharacteristic, band_points, BoxSampler};

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn every_model_builds_and_passes_its_checks() {
        for id in MODEL_IDS {
            let m = build(id, &none(), DomainParams::default()).unwrap();
            let p = &m.problem;
            assert!(p.domain.r < max_radius(p.lip()), "{id}");
            let pts = band_points(&p.domain, 1, 2000);
            assert!(check_noncharacteristic(p, &pts).unwrap().passed(), "{id}");
            let s = BoxSampler::new(&p.domain, 2);
            let pairs: Vec<_> = (0..2000).map(|i| s.pair(i)).collect();
            let rep = check_lipschitz(p, &pairs);
            assert!(rep.passed(), "{id}: {:?}", rep.violations.first());
            for z in &m.boundary_starts {
                assert!(p.domain.delta(z).abs() <= 1e-12, "{id}: {z:?}");
            }
            assert!(!m.start_family.is_empty());
        }
    }

    #[test]
    fn interval_bm_constants() {
        let mut params = none();
        params.insert("z0".into(), 0.75);
        let m = build("interval_bm", &params, DomainParams::default()).unwrap();
        assert_eq!(m.exact_mean, Some(0.25));
        assert_eq!(m.problem.lip(), 2.0);
        assert!((m.r - 0.03).abs() < 1e-15);
        assert!((m.clamp_band - 0.06).abs() < 1e-15);
        let top = &m.boundary_starts[0];
        assert!((top[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(build("nope", &none(), DomainParams::default()).is_err());
        let mut params = none();
        params.insert("zz".into(), 1.0);
        let err = build("interval_bm", &params, DomainParams::default()).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn radius_above_limit_fails() {
        let opts = DomainParams { r: Some(0.04), clamp_band: None };
        assert!(build("interval_bm", &none(), opts).is_err());
    }

    #[test]
    fn start_at_distance_on_ball() {
        let m = build("bm_ball", &none(), DomainParams::default()).unwrap();
        let z = start_at_distance(&m.problem.domain, &[0.0, 0.0], &[1.0, 0.0], 0.0125).unwrap();
        assert!((z[0] - 0.9875).abs() < 1e-12);
        assert!(z[1].abs() < 1e-15);
    }
}
