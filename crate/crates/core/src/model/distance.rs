//! Closed-form signed distances and the C² clamp that makes them bounded.

use super::SignedDistance;

/// C² saturation of a raw distance: identity on `[-band, band]`, constant
/// beyond `band + width`. Its derivative blends from 1 to 0 with a cubic
/// smoothstep, so the first two derivatives are continuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub band: f64,
    pub width: f64,
}

impl Clamp {
    /// Returns `(g(u), g'(u), g''(u))`.
    #[inline]
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        let a = u.abs();
        if a <= self.band {
            return (u, 1.0, 0.0);
        }
        let s = ((a - self.band) / self.width).min(1.0);
        let (mag, slope, curv) = if s >= 1.0 {
            (self.band + 0.5 * self.width, 0.0, 0.0)
        } else {
            let s2 = s * s;
            (
                self.band + self.width * (s - s2 * s + 0.5 * s2 * s2),
                1.0 - 3.0 * s2 + 2.0 * s2 * s,
                (-6.0 * s + 6.0 * s2) / self.width,
            )
        };
        if u >= 0.0 {
            (mag, slope, curv)
        } else {
            (-mag, slope, -curv)
        }
    }

    /// Largest |g''|.
    pub fn curvature_bound(&self) -> f64 {
        1.5 / self.width
    }
}

/// Unclamped closed-form distances with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Open ball; positive inside.
    Ball { center: Vec<f64>, radius: f64 },
    /// 1-D open interval `(lo, hi)`.
    Interval { lo: f64, hi: f64 },
    /// 1-D half-line. With `inside_below` the domain is `(-inf, boundary)`.
    HalfLine { boundary: f64, inside_below: bool },
    /// Time-augmented band `{(t, x) : |x| < c0 - speed * t}`; the value is
    /// the Euclidean distance to the wedge boundary in `(t, x)` space.
    ShrinkingBand { c0: f64, speed: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } => center.len(),
            Shape::Interval { .. } | Shape::HalfLine { .. } => 1,
            Shape::ShrinkingBand { .. } => 2,
        }
    }

    /// Raw distance only.
    #[inline]
    fn value(&self, z: &[f64]) -> f64 {
        match self {
            Shape::Interval { lo, hi } => (z[0] - lo).min(hi - z[0]),
            Shape::HalfLine { boundary, inside_below } => {
                if *inside_below {
                    boundary - z[0]
                } else {
                    z[0] - boundary
                }
            }
            _ => self.eval(z, None, None),
        }
    }

    /// Raw distance, gradient written to `grad`, Hessian (row-major) written
    /// to `hess` when provided.
    fn eval(&self, z: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64 {
        match self {
            Shape::Ball { center, radius } => {
                let d = center.len();
                let norm = z
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                if let Some(g) = grad {
                    for i in 0..d {
                        g[i] = if norm > 0.0 { -(z[i] - center[i]) / norm } else { 0.0 };
                    }
                }
                if let Some(h) = hess {
                    for i in 0..d {
                        for j in 0..d {
                            h[i * d + j] = if norm > 0.0 {
                                let ni = (z[i] - center[i]) / norm;
                                let nj = (z[j] - center[j]) / norm;
                                let id = if i == j { 1.0 } else { 0.0 };
                                -(id - ni * nj) / norm
                            } else {
                                0.0
                            };
                        }
                    }
                }
                radius - norm
            }
            Shape::Interval { lo, hi } => {
                let (u, slope) = if z[0] - lo <= hi - z[0] { (z[0] - lo, 1.0) } else { (hi - z[0], -1.0) };
                if let Some(g) = grad {
                    g[0] = slope;
                }
                if let Some(h) = hess {
                    h[0] = 0.0;
                }
                u
            }
            Shape::HalfLine { boundary, inside_below } => {
                let sign = if *inside_below { -1.0 } else { 1.0 };
                if let Some(g) = grad {
                    g[0] = sign;
                }
                if let Some(h) = hess {
                    h[0] = 0.0;
                }
                sign * (z[0] - boundary)
            }
            Shape::ShrinkingBand { c0, speed } => {
                let norm = (1.0 + speed * speed).sqrt();
                if let Some(g) = grad {
                    g[0] = -speed / norm;
                    g[1] = -z[1].signum() / norm;
                    if z[1] == 0.0 {
                        g[1] = 0.0;
                    }
                }
                if let Some(h) = hess {
                    h.iter_mut().for_each(|v| *v = 0.0);
                }
                (c0 - speed * z[0] - z[1].abs()) / norm
            }
        }
    }

    /// Bound on the raw Hessian over the region where the clamp is not flat.
    fn hessian_bound(&self, reach: f64) -> f64 {
        match self {
            Shape::Ball { radius, .. } => 1.0 / (radius - reach).max(f64::MIN_POSITIVE),
            _ => 0.0,
        }
    }
}

/// A shape composed with an optional clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedShape {
    pub shape: Shape,
    pub clamp: Option<Clamp>,
}

impl ClampedShape {
    pub fn new(shape: Shape, clamp: Option<Clamp>) -> Self {
        Self { shape, clamp }
    }

    /// Bound on the Frobenius norm of the Hessian of the clamped distance.
    pub fn hessian_bound(&self) -> f64 {
        match self.clamp {
            Some(c) => {
                let d = self.shape.dim() as f64;
                c.curvature_bound() + d.sqrt() * self.shape.hessian_bound(c.band + c.width)
            }
            None => f64::INFINITY,
        }
    }
}

impl SignedDistance for ClampedShape {
    fn dim(&self) -> usize {
        self.shape.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let u = self.shape.value(z);
        match self.clamp {
            Some(c) => c.eval(u).0,
            None => u,
        }
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let u = self.shape.eval(z, Some(out), None);
        if let Some(c) = self.clamp {
            let (_, slope, _) = c.eval(u);
            out.iter_mut().for_each(|g| *g *= slope);
        }
    }

    fn hessian(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut grad = vec![0.0; d];
        let u = self.shape.eval(z, Some(&mut grad), Some(out));
        if let Some(c) = self.clamp {
            let (_, slope, curv) = c.eval(u);
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = curv * grad[i] * grad[j] + slope * out[i * d + j];
                }
            }
        }
    }
}
