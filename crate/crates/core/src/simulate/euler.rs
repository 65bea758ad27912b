use super::driver::BrownianDriver;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{Domain, SdeModel};

/// Euler scheme states and distance samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPath {
    grid: TimeGrid,
    dim: usize,
    states: Vec<f64>,
    distances: Vec<f64>,
}

impl EulerPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State at node `k`.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// `delta` of the state at every node.
    pub fn distance_samples(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// The same path observed only at every `factor`-th node.
    pub fn restrict(&self, factor: usize) -> Result<EulerPath> {
        let grid = self.grid.coarsen(factor)?;
        let d = self.dim;
        let keep = (0..self.len()).step_by(factor);
        Ok(EulerPath {
            grid,
            dim: d,
            states: keep.clone().flat_map(|k| self.state(k).iter().copied()).collect(),
            distances: keep.map(|k| self.distances[k]).collect(),
        })
    }
}

/// One Euler step with compensated accumulation of the state. The
/// compensation carries over between steps of the same path.
pub(crate) struct EulerStepper {
    d: usize,
    pub(crate) mu: Vec<f64>,
    pub(crate) sigma: Vec<f64>,
    comp: Vec<f64>,
    frozen: bool,
}

impl EulerStepper {
    pub(crate) fn new(d: usize) -> Self {
        Self { d, mu: vec![0.0; d], sigma: vec![0.0; d * d], comp: vec![0.0; d], frozen: false }
    }

    /// Evaluates the frozen coefficients at `x`; constant coefficients are
    /// evaluated on the first call only.
    #[inline]
    pub(crate) fn freeze(&mut self, model: &SdeModel, x: &[f64]) {
        if self.frozen && model.constant_coefficients() {
            return;
        }
        model.drift(x, &mut self.mu);
        model.diffusion(x, &mut self.sigma);
        self.frozen = true;
    }

    /// `x += mu dt + sigma dw` with the coefficients from the last `freeze`.
    #[inline]
    pub(crate) fn advance(&mut self, x: &mut [f64], dt: f64, dw: &[f64]) {
        let d = self.d;
        for i in 0..d {
            let mut inc = self.mu[i] * dt;
            let row = &self.sigma[i * d..(i + 1) * d];
            for j in 0..d {
                inc += row[j] * dw[j];
            }
            let y = inc - self.comp[i];
            let t = x[i] + y;
            self.comp[i] = (t - x[i]) - y;
            x[i] = t;
        }
    }

    /// As [`advance`](Self::advance), reading the state from `x` and writing
    /// the new state to `out`.
    #[inline]
    pub(crate) fn advance_from(&mut self, x: &[f64], dt: f64, dw: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let mut inc = self.mu[i] * dt;
            let row = &self.sigma[i * d..(i + 1) * d];
            for j in 0..d {
                inc += row[j] * dw[j];
            }
            let y = inc - self.comp[i];
            let t = x[i] + y;
            self.comp[i] = (t - x[i]) - y;
            out[i] = t;
        }
    }

    /// Continuous-time Euler value `x_phi + mu (t - phi) + sigma (W_t - W_phi)`
    /// written to `out`, using the frozen coefficients.
    #[inline]
    pub(crate) fn interpolate(&self, x_phi: &[f64], elapsed: f64, dw: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let mut v = self.mu[i] * elapsed;
            for j in 0..d {
                v += self.sigma[i * d + j] * dw[j];
            }
            out[i] = x_phi[i] + v;
        }
    }
}

/// Euler scheme driven by `driver`, started at the model's initial point:
/// `X_{k+1} = X_k + mu(X_k) dt_k + sigma(X_k) dW_k`.
pub fn euler_path(model: &SdeModel, domain: &Domain, driver: &BrownianDriver) -> Result<EulerPath> {
    let d = model.dim();
    if driver.dim() != d || domain.dim() != d {
        return Err(Error::Parameter("driver, model and domain dimensions differ".into()));
    }
    let grid = driver.grid().clone();
    let n = grid.len();
    let mut states = Vec::with_capacity(n * d);
    let mut distances = Vec::with_capacity(n);
    let mut x = model.x0().to_vec();
    let mut stepper = EulerStepper::new(d);
    states.extend_from_slice(&x);
    distances.push(domain.delta(&x));
    for k in 0..n - 1 {
        stepper.freeze(model, &x);
        stepper.advance(&mut x, grid.step(k), driver.increment(k));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node: k + 1 });
        }
        states.extend_from_slice(&x);
        distances.push(domain.delta(&x));
    }
    Ok(EulerPath { grid, dim: d, states, distances })
}
