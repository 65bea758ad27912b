use super::rng::{CounterRng, Draws, Tag};
use crate::error::{param, Result};
use crate::grid::TimeGrid;

/// Brownian increments over a grid, as a pure function of
/// `(seed, path_index, grid, dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianDriver {
    pub seed: u64,
    pub path_index: u64,
    dim: usize,
    grid: TimeGrid,
    /// Row-major: `increments[k * dim + j]` is coordinate `j` of step `k`.
    increments: Vec<f64>,
}

impl BrownianDriver {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Increment over step `k`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W` at every node, starting from zero.
    pub fn path(&self) -> Vec<Vec<f64>> {
        let mut w = vec![0.0; self.dim];
        let mut out = vec![w.clone()];
        for k in 0..self.grid.len() - 1 {
            for (wj, dj) in w.iter_mut().zip(self.increment(k)) {
                *wj += dj;
            }
            out.push(w.clone());
        }
        out
    }
}

/// Gaussian increments `N(0, step * I)`. Draw `k * dim + j` of the path's
/// increment stream feeds coordinate `j` of step `k`.
pub fn sample_increments(seed: u64, path_index: u64, grid: &TimeGrid, dim: usize) -> BrownianDriver {
    let mut draws = CounterRng::new(seed).stream(path_index, Tag::Increments, 0);
    let steps = grid.len() - 1;
    let mut increments = Vec::with_capacity(steps * dim);
    for k in 0..steps {
        let scale = grid.step(k).sqrt();
        for _ in 0..dim {
            increments.push(scale * draws.normal());
        }
    }
    BrownianDriver { seed, path_index, dim, grid: grid.clone(), increments }
}

/// Coefficients of the sequential bridge fill for `factor` sub-steps:
/// `(1 / n_rem, sqrt((n_rem - 1) / n_rem))` for `n_rem = factor, ..., 2`.
pub(crate) fn bridge_table(factor: usize) -> Vec<(f64, f64)> {
    (0..factor.saturating_sub(1))
        .map(|m| {
            let n = (factor - m) as f64;
            (1.0 / n, ((n - 1.0) / n).sqrt())
        })
        .collect()
}

/// Splits `total` into `table.len() + 1` sub-increments of a Brownian path
/// conditioned on its sum. Each sub-increment is drawn from its law given
/// the remaining sum; the last one is the remainder. Writes `out[m * stride]`.
#[inline]
pub(crate) fn bridge_fill(total: f64, sqrt_sub: f64, table: &[(f64, f64)], draws: &mut Draws, out: &mut [f64], stride: usize) {
    let mut rem = total;
    for (m, &(inv, scale)) in table.iter().enumerate() {
        let next = rem * inv + sqrt_sub * scale * draws.normal();
        out[m * stride] = next;
        rem -= next;
    }
    out[table.len() * stride] = rem;
}

/// Brownian-bridge refinement: each step split into `factor` sub-steps whose
/// sum is the original increment up to rounding. Step `k`, coordinate `j`
/// reads its `factor - 1` normals from the bridge stream of `sub_seed`
/// starting at draw `(k * dim + j) * (factor - 1)`. Refining twice should
/// use distinct sub-seeds.
pub fn refine(driver: &BrownianDriver, factor: usize, sub_seed: u64) -> Result<BrownianDriver> {
    if factor < 2 {
        return param("refinement factor must be at least 2");
    }
    let grid = driver.grid.refine(factor)?;
    let d = driver.dim;
    let rng = CounterRng::new(sub_seed);
    let table = bridge_table(factor);
    let steps = driver.grid.len() - 1;
    let mut increments = vec![0.0; steps * factor * d];
    for k in 0..steps {
        let sqrt_sub = (driver.grid.step(k) / factor as f64).sqrt();
        for j in 0..d {
            let mut draws = rng.stream(driver.path_index, Tag::Bridge, ((k * d + j) * (factor - 1)) as u64);
            let out = &mut increments[k * factor * d + j..];
            bridge_fill(driver.increment(k)[j], sqrt_sub, &table, &mut draws, out, d);
        }
    }
    Ok(BrownianDriver { seed: driver.seed, path_index: driver.path_index, dim: d, grid, increments })
}

/// Sums consecutive groups of `factor` increments, left to right.
pub fn coarsen(driver: &BrownianDriver, factor: usize) -> Result<BrownianDriver> {
    let grid = driver.grid.coarsen(factor)?;
    let d = driver.dim;
    let steps = grid.len() - 1;
    let mut increments = vec![0.0; steps * d];
    for k in 0..steps {
        for j in 0..d {
            let mut acc = 0.0;
            for m in 0..factor {
                acc += driver.increments[(k * factor + m) * d + j];
            }
            increments[k * d + j] = acc;
        }
    }
    Ok(BrownianDriver { seed: driver.seed, path_index: driver.path_index, dim: d, grid, increments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let g = TimeGrid::uniform(0.1, 1.0).unwrap();
        assert_eq!(sample_increments(7, 3, &g, 2), sample_increments(7, 3, &g, 2));
        assert_ne!(sample_increments(7, 3, &g, 2), sample_increments(7, 4, &g, 2));
    }

    #[test]
    fn increment_moments() {
        let h = 0.01;
        let n = 100_000;
        let g = TimeGrid::uniform(h, h * n as f64).unwrap();
        let drv = sample_increments(11, 0, &g, 1);
        let inc = drv.increments();
        assert_eq!(inc.len(), n);
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * (h / n as f64).sqrt(), "{mean}");
        assert!((var / h - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn refine_then_coarsen_recovers_increments() {
        let g = TimeGrid::uniform(0.25, 2.0).unwrap();
        let drv = sample_increments(1, 9, &g, 2);
        for factor in [2, 3, 64] {
            let fine = refine(&drv, factor, 5).unwrap();
            assert_eq!(fine.grid().len(), (g.len() - 1) * factor + 1);
            let back = coarsen(&fine, factor).unwrap();
            assert_eq!(back.grid(), drv.grid());
            for (a, b) in back.increments().iter().zip(drv.increments()) {
                assert!((a - b).abs() <= 64.0 * f64::EPSILON * b.abs().max(1.0), "{a} {b}");
            }
        }
        // factor two: the coarse path is visited exactly at even fine nodes
        let fine = refine(&drv, 2, 5).unwrap();
        let (wc, wf) = (drv.path(), fine.path());
        for k in 0..wc.len() {
            for j in 0..2 {
                assert!((wc[k][j] - wf[2 * k][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bridge_midpoint_variance() {
        let h = 0.5;
        let n = 100_000;
        let g = TimeGrid::uniform(h, h * n as f64 / 2.0).unwrap();
        let drv = sample_increments(2, 0, &g, 1);
        let fine = refine(&drv, 2, 3).unwrap();
        // first half minus half the total is the bridge deviation
        let dev: Vec<f64> = (0..drv.increments().len())
            .map(|k| fine.increments()[2 * k] - 0.5 * drv.increments()[k])
            .collect();
        let var = dev.iter().map(|x| x * x).sum::<f64>() / dev.len() as f64;
        assert!((var / (h / 4.0) - 1.0).abs() < 0.05, "{var}");
    }
}
