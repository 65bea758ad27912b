//! SDE dynamics, domain geometry, the Itô coefficients of the distance
//! process and sampled checks of the standing assumptions.

mod distance;
pub mod zoo;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};

pub use distance::{Clamp, ClampedShape, Shape};

/// Drift and diffusion evaluators of `dX = mu(X) dt + sigma(X) dW`.
///
/// The diffusion matrix is written row-major: `out[i * d + j] = sigma_ij`.
pub trait Dynamics: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    /// True when neither coefficient depends on the state, so that the
    /// Euler scheme may evaluate them once per path.
    fn constant_coefficients(&self) -> bool {
        false
    }
}

/// Dynamics backed by two closures.
pub struct FnDynamics<M, S> {
    dim: usize,
    drift: M,
    diffusion: S,
    constant: bool,
}

impl<M, S> FnDynamics<M, S>
where
    M: Fn(&[f64], &mut [f64]) + Send + Sync,
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, drift: M, diffusion: S) -> Self {
        Self { dim, drift, diffusion, constant: false }
    }

    /// Declares both closures independent of the state.
    pub fn with_constant_coefficients(mut self) -> Self {
        self.constant = true;
        self
    }
}

impl<M, S> Dynamics for FnDynamics<M, S>
where
    M: Fn(&[f64], &mut [f64]) + Send + Sync,
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }
    fn constant_coefficients(&self) -> bool {
        self.constant
    }
}

/// Signed distance `delta` to the boundary: positive inside, zero on the
/// boundary, negative outside. Derivatives default to central differences.
pub trait SignedDistance: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        fd_gradient(self, z, out)
    }
    fn hessian(&self, z: &[f64], out: &mut [f64]) {
        fd_hessian(self, z, out)
    }
}

fn fd_step(z: &[f64]) -> f64 {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-5 * norm.max(1.0)
}

/// Central-difference gradient with step `1e-5 * max(1, |z|)`.
pub fn fd_gradient<D: SignedDistance + ?Sized>(delta: &D, z: &[f64], out: &mut [f64]) {
    let h = fd_step(z);
    let mut p = z.to_vec();
    for i in 0..z.len() {
        p[i] = z[i] + h;
        let fp = delta.value(&p);
        p[i] = z[i] - h;
        let fm = delta.value(&p);
        p[i] = z[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

/// Central-difference Hessian with step `1e-5 * max(1, |z|)`.
pub fn fd_hessian<D: SignedDistance + ?Sized>(delta: &D, z: &[f64], out: &mut [f64]) {
    let h = fd_step(z);
    let d = z.len();
    let f0 = delta.value(z);
    let mut p = z.to_vec();
    for i in 0..d {
        p[i] = z[i] + h;
        let fp = delta.value(&p);
        p[i] = z[i] - h;
        let fm = delta.value(&p);
        p[i] = z[i];
        out[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..d {
            let mut corner = |si: f64, sj: f64| {
                p[i] = z[i] + si * h;
                p[j] = z[j] + sj * h;
                let v = delta.value(&p);
                p[i] = z[i];
                p[j] = z[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
}

/// Signed distance given only by its value; derivatives by finite
/// differences.
pub struct FnDistance<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnDistance<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> SignedDistance for FnDistance<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }
}

/// Itô diffusion with declared Lipschitz and boundedness constants.
#[derive(Clone)]
pub struct SdeModel {
    dynamics: Arc<dyn Dynamics>,
    pub lip_mu: f64,
    pub lip_sigma: f64,
    pub bound: f64,
    x0: Vec<f64>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim", &self.dim())
            .field("lip_mu", &self.lip_mu)
            .field("lip_sigma", &self.lip_sigma)
            .field("bound", &self.bound)
            .field("x0", &self.x0)
            .finish()
    }
}

impl SdeModel {
    pub fn new(
        dynamics: impl Dynamics + 'static,
        lip_mu: f64,
        lip_sigma: f64,
        bound: f64,
        x0: Vec<f64>,
    ) -> Result<Self> {
        if dynamics.dim() == 0 || x0.len() != dynamics.dim() {
            return param("initial point dimension does not match the dynamics");
        }
        if !(lip_mu > 0.0) || !(lip_sigma > 0.0) {
            return param("Lipschitz constants must be positive");
        }
        if !(bound >= 1.0) {
            return param("coefficient bound must be at least 1");
        }
        if lip_mu > bound || lip_sigma > bound {
            return param("Lipschitz constants may not exceed the coefficient bound");
        }
        Ok(Self { dynamics: Arc::new(dynamics), lip_mu, lip_sigma, bound, x0 })
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn constant_coefficients(&self) -> bool {
        self.dynamics.constant_coefficients()
    }

    #[inline]
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.dynamics.drift(x, out)
    }

    #[inline]
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.dynamics.diffusion(x, out)
    }

    /// Same dynamics started elsewhere.
    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim() {
            return param("initial point dimension does not match the dynamics");
        }
        Ok(Self { x0, ..self.clone() })
    }
}

/// Domain given by a signed distance with its non-characteristic radius `r`
/// and declared constants.
#[derive(Clone)]
pub struct Domain {
    distance: Arc<dyn SignedDistance>,
    /// Non-characteristic radius.
    pub r: f64,
    /// Lipschitz constant of the distance.
    pub lip: f64,
    /// Bound on the Frobenius norm of the Hessian of the distance.
    pub hessian_bound: f64,
    /// Box used by the samplers: `(lower, upper)` corners.
    pub bounding_box: (Vec<f64>, Vec<f64>),
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("dim", &self.dim())
            .field("r", &self.r)
            .field("lip", &self.lip)
            .field("hessian_bound", &self.hessian_bound)
            .finish()
    }
}

impl Domain {
    pub fn new(
        distance: impl SignedDistance + 'static,
        r: f64,
        lip: f64,
        hessian_bound: f64,
        bounding_box: (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        if !(r > 0.0) {
            return param("non-characteristic radius must be positive");
        }
        if !(lip >= 1.0) {
            return param("distance Lipschitz constant must be at least 1");
        }
        let d = distance.dim();
        if bounding_box.0.len() != d || bounding_box.1.len() != d {
            return param("bounding box dimension does not match the distance");
        }
        Ok(Self { distance: Arc::new(distance), r, lip, hessian_bound, bounding_box })
    }

    pub fn dim(&self) -> usize {
        self.distance.dim()
    }

    #[inline]
    pub fn delta(&self, z: &[f64]) -> f64 {
        self.distance.value(z)
    }

    #[inline]
    pub fn grad_delta(&self, z: &[f64], out: &mut [f64]) {
        self.distance.gradient(z, out)
    }

    #[inline]
    pub fn hess_delta(&self, z: &[f64], out: &mut [f64]) {
        self.distance.hessian(z, out)
    }
}

/// `delta(z)`: positive inside, zero on the boundary, negative outside.
pub fn signed_distance(domain: &Domain, z: &[f64]) -> f64 {
    domain.delta(z)
}

/// A model and domain whose constants are mutually consistent.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: SdeModel,
    pub domain: Domain,
    lip: f64,
}

impl Problem {
    /// Fails when dimensions disagree, the start is not inside, or
    /// `r >= L^-3 / 4` for the effective constant `L`.
    pub fn new(model: SdeModel, domain: Domain) -> Result<Self> {
        if model.dim() != domain.dim() {
            return param("model and domain dimensions differ");
        }
        let lip = effective_lipschitz(&model, &domain);
        let r_max = max_radius(lip);
        if domain.r >= r_max {
            return param(format!(
                "non-characteristic radius {} must be below L^-3/4 = {} (L = {})",
                domain.r, r_max, lip
            ));
        }
        if !(domain.delta(model.x0()) > 0.0) {
            return param("initial point must lie inside the domain");
        }
        Ok(Self { model, domain, lip })
    }

    /// Effective single constant `L`.
    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Clamp constant for the distance-process drift:
    /// `L * (L + L^2 * |D^2 delta| / 2)`, never below `L`.
    pub fn drift_clamp(&self) -> f64 {
        let l = self.lip;
        (l * (l + 0.5 * l * l * self.domain.hessian_bound)).max(l)
    }

    /// Same problem with another starting point.
    pub fn with_start(&self, x0: Vec<f64>) -> Result<Self> {
        Self::new(self.model.with_x0(x0)?, self.domain.clone())
    }
}

/// `max(1, lip_mu, lip_sigma, bound, lip_delta)`.
pub fn effective_lipschitz(model: &SdeModel, domain: &Domain) -> f64 {
    [1.0, model.lip_mu, model.lip_sigma, model.bound, domain.lip]
        .into_iter()
        .fold(f64::MIN, f64::max)
}

/// Largest admissible non-characteristic radius, `L^-3 / 4`.
pub fn max_radius(lip: f64) -> f64 {
    0.25 / (lip * lip * lip)
}

/// Drift `b` and diffusion row `a` of the distance process.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCoefficients {
    pub b: f64,
    pub a: Vec<f64>,
}

impl DistanceCoefficients {
    pub fn a_norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `b = Ddelta(current) mu(anchor) + Tr[(sigma sigma^T)(anchor) D^2delta(current)] / 2`
/// and `a = sigma(anchor)^T Ddelta(current)^T`.
///
/// With `anchor == current` these are the coefficients of the exact
/// diffusion; with `anchor` the last grid state they are the Euler-scheme
/// coefficients.
pub fn distance_coefficients(
    model: &SdeModel,
    domain: &Domain,
    current: &[f64],
    anchor: &[f64],
) -> DistanceCoefficients {
    let d = model.dim();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    domain.grad_delta(current, &mut grad);
    domain.hess_delta(current, &mut hess);
    model.drift(anchor, &mut mu);
    model.diffusion(anchor, &mut sigma);

    let mut b: f64 = grad.iter().zip(&mu).map(|(g, m)| g * m).sum();
    // Tr[S H] with S = sigma sigma^T
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            let s_ij: f64 = (0..d).map(|k| sigma[i * d + k] * sigma[j * d + k]).sum();
            trace += s_ij * hess[j * d + i];
        }
    }
    b += 0.5 * trace;
    let a = (0..d).map(|j| a_component(&grad, &sigma, d, j)).collect();
    DistanceCoefficients { b, a }
}

/// Component `j` of `sigma^T grad`.
#[inline]
pub(crate) fn a_component(grad: &[f64], sigma: &[f64], d: usize, j: usize) -> f64 {
    (0..d).map(|i| grad[i] * sigma[i * d + j]).sum()
}

/// `|sigma^T grad|^2`, summed in the same order as `DistanceCoefficients::a`.
#[inline]
pub(crate) fn a_norm_sq(grad: &[f64], sigma: &[f64], d: usize) -> f64 {
    (0..d).map(|j| a_component(grad, sigma, d, j)).map(|v| v * v).sum()
}

/// One failed sample of an assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Vec<f64>,
    pub quantity: &'static str,
    pub observed: f64,
    pub required: f64,
}

/// Outcome of a sampled assumption check.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checked_points: usize,
    pub violations: Vec<Violation>,
    /// Worst observed value of each checked quantity (a maximum for upper
    /// bounds, a minimum for lower bounds).
    pub worst: BTreeMap<&'static str, f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: AssumptionReport) {
        self.checked_points += other.checked_points;
        self.violations.extend(other.violations);
        for (k, v) in other.worst {
            self.worst.insert(k, v);
        }
    }

    fn track_max(&mut self, key: &'static str, v: f64) {
        let e = self.worst.entry(key).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    fn track_min(&mut self, key: &'static str, v: f64) {
        let e = self.worst.entry(key).or_insert(f64::INFINITY);
        *e = e.min(v);
    }
}

/// Relative slack for comparisons against declared constants; absorbs
/// rounding and finite-difference error.
const CHECK_SLACK: f64 = 1e-9;

/// Points in the boundary band `{|delta| <= r}` drawn by rejection from the
/// domain's bounding box.
pub fn band_points(domain: &Domain, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let sampler = BoxSampler::new(domain, seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(2000).max(10_000);
    for i in 0..max_attempts as u64 {
        if out.len() == count {
            break;
        }
        let z = sampler.point(i);
        if domain.delta(&z).abs() <= domain.r {
            out.push(z);
        }
    }
    out
}

/// Uniform points in the domain's bounding box, addressed by index.
pub struct BoxSampler {
    lo: Vec<f64>,
    hi: Vec<f64>,
    rng: crate::simulate::CounterRng,
}

impl BoxSampler {
    pub fn new(domain: &Domain, seed: u64) -> Self {
        Self {
            lo: domain.bounding_box.0.clone(),
            hi: domain.bounding_box.1.clone(),
            rng: crate::simulate::CounterRng::new(seed),
        }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        let mut s = self.rng.stream(index, crate::simulate::Tag::Sampler, 0);
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| lo + (hi - lo) * s.uniform()).collect()
    }

    /// A pair `(x, y)`. Odd indices pull `y` close to `x` so that local
    /// Lipschitz ratios are probed as well as global ones.
    pub fn pair(&self, index: u64) -> (Vec<f64>, Vec<f64>) {
        let x = self.point(2 * index);
        let mut y = self.point(2 * index + 1);
        if index % 2 == 1 {
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = xi + 0.01 * (*yi - xi);
            }
        }
        (x, y)
    }
}

/// Flags band points where `|Ddelta sigma| < 2 / L`.
pub fn check_noncharacteristic(problem: &Problem, points: &[Vec<f64>]) -> Result<AssumptionReport> {
    let domain = &problem.domain;
    let valid: Vec<&Vec<f64>> = points.iter().filter(|z| domain.delta(z).abs() <= domain.r).collect();
    if valid.is_empty() {
        return Err(Error::EmptyBandSample);
    }
    let required = 2.0 / problem.lip();
    let mut report = AssumptionReport::default();
    for z in valid {
        let margin = distance_coefficients(&problem.model, domain, z, z).a_norm();
        report.checked_points += 1;
        report.track_min("noncharacteristic", margin);
        if margin < required * (1.0 - CHECK_SLACK) {
            report.violations.push(Violation {
                location: z.clone(),
                quantity: "noncharacteristic",
                observed: margin,
                required,
            });
        }
    }
    Ok(report)
}

fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Checks the declared `lip_mu`, `lip_sigma`, `bound`, the Lipschitz
/// constant of `delta` and `|Ddelta| <= 1` on sampled pairs.
pub fn check_lipschitz(problem: &Problem, pairs: &[(Vec<f64>, Vec<f64>)]) -> AssumptionReport {
    let (model, domain) = (&problem.model, &problem.domain);
    let d = model.dim();
    let mut report = AssumptionReport::default();
    let (mut mx, mut my) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; d * d], vec![0.0; d * d]);
    let mut grad = vec![0.0; d];
    let exceeds = |observed: f64, required: f64| observed > required * (1.0 + CHECK_SLACK) + 1e-12;
    for (x, y) in pairs {
        report.checked_points += 1;
        model.drift(x, &mut mx);
        model.drift(y, &mut my);
        model.diffusion(x, &mut sx);
        model.diffusion(y, &mut sy);
        let dist = frobenius_diff(x, y);
        let mut checks: Vec<(&'static str, f64, f64)> = Vec::with_capacity(5);
        if dist > 0.0 {
            checks.push(("lip_mu", frobenius_diff(&mx, &my) / dist, model.lip_mu));
            checks.push(("lip_sigma", frobenius_diff(&sx, &sy) / dist, model.lip_sigma));
            checks.push(("lip_delta", (domain.delta(x) - domain.delta(y)).abs() / dist, domain.lip));
        }
        checks.push(("bound", norm(&mx) + norm(&sx), model.bound));
        domain.grad_delta(x, &mut grad);
        checks.push(("grad_delta", norm(&grad), 1.0));
        for (quantity, observed, required) in checks {
            report.track_max(quantity, observed);
            if exceeds(observed, required) {
                report.violations.push(Violation { location: x.clone(), quantity, observed, required });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm(d: usize) -> SdeModel {
        SdeModel::new(
            FnDynamics::new(
                d,
                |_x: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0),
                move |_x: &[f64], out: &mut [f64]| {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    for i in 0..d {
                        out[i * d + i] = 1.0;
                    }
                },
            ),
            1.0,
            1.0,
            2.0,
            vec![0.0; d],
        )
        .unwrap()
    }

    fn unit_ball(d: usize, clamp: Option<Clamp>) -> Domain {
        Domain::new(
            ClampedShape::new(Shape::Ball { center: vec![0.0; d], radius: 1.0 }, clamp),
            0.03,
            1.0,
            30.0,
            (vec![-1.2; d], vec![1.2; d]),
        )
        .unwrap()
    }

    #[test]
    fn coefficients_for_bm_in_ball() {
        let model = bm(2);
        let domain = unit_ball(2, None);
        let c = distance_coefficients(&model, &domain, &[0.5, 0.0], &[0.5, 0.0]);
        assert!((c.a[0] + 1.0).abs() < 1e-15 && c.a[1].abs() < 1e-15);
        assert!((c.b + 1.0).abs() < 1e-12);

        // same via finite differences of the bare distance
        let fd = Domain::new(
            FnDistance::new(2, |z: &[f64]| 1.0 - (z[0] * z[0] + z[1] * z[1]).sqrt()),
            0.03,
            1.0,
            30.0,
            (vec![-1.2; 2], vec![1.2; 2]),
        )
        .unwrap();
        let c_fd = distance_coefficients(&model, &fd, &[0.5, 0.0], &[0.5, 0.0]);
        assert!((c_fd.a[0] + 1.0).abs() < 1e-8);
        assert!((c_fd.b + 1.0).abs() < 1e-4);
    }

    #[test]
    fn coefficients_for_null_and_linear_dynamics() {
        let null = SdeModel::new(
            FnDynamics::new(2, |_: &[f64], o: &mut [f64]| o.fill(0.0), |_: &[f64], o: &mut [f64]| o.fill(0.0)),
            1.0,
            1.0,
            1.0,
            vec![0.0; 2],
        )
        .unwrap();
        let c = distance_coefficients(&null, &unit_ball(2, None), &[0.3, 0.2], &[0.1, 0.0]);
        assert_eq!(c.b, 0.0);
        assert_eq!(c.a, vec![0.0, 0.0]);

        let (m, s) = (0.7, 1.3);
        let lin = SdeModel::new(
            FnDynamics::new(1, move |_: &[f64], o: &mut [f64]| o[0] = m, move |_: &[f64], o: &mut [f64]| o[0] = s),
            1.0,
            1.0,
            2.0,
            vec![0.0],
        )
        .unwrap();
        let half_line = Domain::new(
            ClampedShape::new(Shape::HalfLine { boundary: 1.0, inside_below: true }, None),
            0.01,
            1.0,
            0.0,
            (vec![-1.0], vec![2.0]),
        )
        .unwrap();
        for z in [-0.5, 0.2, 0.99, 1.7] {
            let c = distance_coefficients(&lin, &half_line, &[z], &[z * 0.5]);
            assert_eq!(c.b, -m);
            assert_eq!(c.a, vec![-s]);
        }
    }

    #[test]
    fn effective_constant_rejects_large_radius() {
        let model = bm(2);
        let dom = Domain::new(
            ClampedShape::new(Shape::Ball { center: vec![0.0; 2], radius: 1.0 }, None),
            0.05,
            1.0,
            1.0,
            (vec![-1.2; 2], vec![1.2; 2]),
        )
        .unwrap();
        let err = Problem::new(model.clone(), dom).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
        let p = Problem::new(model, unit_ball(2, None)).unwrap();
        assert_eq!(p.lip(), 2.0);
        assert!((max_radius(2.0) - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn noncharacteristic_checks() {
        let p = Problem::new(bm(2), unit_ball(2, Some(Clamp { band: 0.06, width: 0.06 }))).unwrap();
        let pts = band_points(&p.domain, 3, 1000);
        assert_eq!(pts.len(), 1000);
        let rep = check_noncharacteristic(&p, &pts).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations.first());
        assert!((rep.worst["noncharacteristic"] - 1.0).abs() < 1e-12);

        // degenerate direction: sigma = diag(1, 0), band |z2| < 1
        let degenerate = SdeModel::new(
            FnDynamics::new(
                2,
                |_: &[f64], o: &mut [f64]| o.fill(0.0),
                |_: &[f64], o: &mut [f64]| {
                    o.fill(0.0);
                    o[0] = 1.0;
                },
            ),
            1.0,
            1.0,
            2.0,
            vec![0.0, 0.0],
        )
        .unwrap();
        let band = Domain::new(
            FnDistance::new(2, |z: &[f64]| 1.0 - z[1].abs()),
            0.03,
            1.0,
            0.0,
            (vec![-1.0, -1.2], vec![1.0, 1.2]),
        )
        .unwrap();
        let p = Problem::new(degenerate, band).unwrap();
        let pts = band_points(&p.domain, 5, 200);
        let rep = check_noncharacteristic(&p, &pts).unwrap();
        assert_eq!(rep.violations.len(), pts.len());

        // sigma = 0 entirely
        let frozen = SdeModel::new(
            FnDynamics::new(2, |_: &[f64], o: &mut [f64]| o.fill(0.0), |_: &[f64], o: &mut [f64]| o.fill(0.0)),
            1.0,
            1.0,
            2.0,
            vec![0.0; 2],
        )
        .unwrap();
        let p = Problem::new(frozen, unit_ball(2, Some(Clamp { band: 0.06, width: 0.06 }))).unwrap();
        let rep = check_noncharacteristic(&p, &band_points(&p.domain, 7, 100)).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.worst["noncharacteristic"], 0.0);

        // no band points at all
        assert_eq!(check_noncharacteristic(&p, &[vec![0.0, 0.0]]).unwrap_err(), Error::EmptyBandSample);
    }

    fn one_d(drift: fn(f64) -> f64, sigma: f64, lip_mu: f64) -> Problem {
        let model = SdeModel::new(
            FnDynamics::new(1, move |x: &[f64], o: &mut [f64]| o[0] = drift(x[0]), move |_: &[f64], o: &mut [f64]| o[0] = sigma),
            lip_mu,
            1.0,
            4.0,
            vec![0.0],
        )
        .unwrap();
        let dom = Domain::new(
            ClampedShape::new(Shape::Interval { lo: -1.0, hi: 1.0 }, Some(Clamp { band: 0.002, width: 0.002 })),
            0.001,
            1.0,
            750.0,
            (vec![-1.0], vec![1.0]),
        )
        .unwrap();
        Problem::new(model, dom).unwrap()
    }

    #[test]
    fn lipschitz_checks() {
        let p = one_d(f64::sin, 1.0, 1.0);
        let s = BoxSampler::new(&p.domain, 11);
        let pairs: Vec<_> = (0..2000).map(|i| s.pair(i)).collect();
        let rep = check_lipschitz(&p, &pairs);
        assert!(rep.passed(), "{:?}", rep.violations.first());
        assert!(rep.worst["lip_mu"] <= 1.0);

        let p = one_d(|x| 2.0 * x, 1.0, 1.0);
        let rep = check_lipschitz(&p, &pairs);
        assert!(!rep.passed());
        assert!((rep.worst["lip_mu"] - 2.0).abs() < 1e-9);

        let p = one_d(f64::sin, 0.5, 1.0);
        let rep = check_lipschitz(&p, &pairs);
        assert_eq!(rep.worst["lip_sigma"], 0.0);
    }
}
