//! Time grids and the floor/ceiling node projections.

use crate::error::{param, Error, Result};

/// A finite, strictly increasing time grid starting at zero.
///
/// Nodes are stored and never recomputed from a step size, so lookups by
/// exact equality are reliable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    mesh: f64,
}

impl TimeGrid {
    /// Builds a grid from explicit nodes. The first node must be 0, nodes
    /// must be strictly increasing and no step may exceed 1.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return param("a grid needs at least two nodes");
        }
        if nodes[0] != 0.0 {
            return param("first grid node must be 0");
        }
        let mut mesh = 0.0f64;
        for w in nodes.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) || !w[1].is_finite() {
                return param("grid nodes must be finite and strictly increasing");
            }
            mesh = mesh.max(step);
        }
        if mesh > 1.0 {
            return param("mesh exceeds 1");
        }
        Ok(Self { nodes, mesh })
    }

    /// Uniform grid `{0, h, 2h, ...}` covering `horizon`.
    pub fn uniform(h: f64, horizon: f64) -> Result<Self> {
        if !(h > 0.0) {
            return param("mesh must be positive");
        }
        if h > 1.0 {
            return param("mesh exceeds 1");
        }
        if !(horizon >= h) || !horizon.is_finite() {
            return param("horizon must be at least one step");
        }
        let steps = (horizon / h - 1e-9).ceil().max(1.0) as usize;
        let nodes = (0..=steps).map(|k| k as f64 * h).collect();
        Ok(Self { nodes, mesh: h })
    }

    /// Grid whose steps grow geometrically from `first` by `ratio`, capped at
    /// `max_step`, until `horizon` is covered.
    pub fn geometric(first: f64, ratio: f64, max_step: f64, horizon: f64) -> Result<Self> {
        if !(first > 0.0) || !(ratio >= 1.0) || !(max_step >= first) {
            return param("geometric grid needs 0 < first <= max_step and ratio >= 1");
        }
        if max_step > 1.0 {
            return param("mesh exceeds 1");
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return param("horizon must be positive");
        }
        let mut nodes = vec![0.0];
        let mut step = first;
        let mut t = 0.0;
        while t < horizon {
            t += step;
            nodes.push(t);
            step = (step * ratio).min(max_step);
        }
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Index of `t` if it is exactly a node.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.nodes
            .binary_search_by(|n| n.partial_cmp(&t).expect("nodes are finite"))
            .ok()
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.horizon() {
            Ok(())
        } else {
            Err(Error::Range { t, horizon: self.horizon() })
        }
    }

    /// Index of the last node `<= t`.
    pub fn floor_index(&self, t: f64) -> Result<usize> {
        self.check_range(t)?;
        Ok(self.nodes.partition_point(|&n| n <= t) - 1)
    }

    /// Index of the first node `>= t`.
    pub fn ceil_index(&self, t: f64) -> Result<usize> {
        self.check_range(t)?;
        Ok(self.nodes.partition_point(|&n| n < t))
    }

    /// Largest node not after `t`.
    pub fn floor_node(&self, t: f64) -> Result<f64> {
        Ok(self.nodes[self.floor_index(t)?])
    }

    /// Smallest node not before `t`.
    pub fn ceil_node(&self, t: f64) -> Result<f64> {
        Ok(self.nodes[self.ceil_index(t)?])
    }

    /// Every `factor`-th node of this grid, as a new grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || (self.nodes.len() - 1) % factor != 0 {
            return param("coarsening factor must divide the number of steps");
        }
        Self::from_nodes(self.nodes.iter().step_by(factor).copied().collect())
    }

    /// Each step split into `factor` equal sub-steps. Original nodes are kept
    /// bit-for-bit.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return param("refinement factor must be positive");
        }
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * factor + 1);
        for w in self.nodes.windows(2) {
            let step = (w[1] - w[0]) / factor as f64;
            nodes.push(w[0]);
            for j in 1..factor {
                nodes.push(w[0] + j as f64 * step);
            }
        }
        nodes.push(self.horizon());
        Self::from_nodes(nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        let g = TimeGrid::uniform(0.5, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.mesh(), 0.5);

        let g = TimeGrid::uniform(0.3, 1.0).unwrap();
        let expect = [0.0, 0.3, 0.6, 0.9, 1.2];
        assert_eq!(g.len(), expect.len());
        for (a, b) in g.nodes().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }

        assert!(matches!(TimeGrid::uniform(1.5, 1.0), Err(Error::Parameter(_))));
        assert!(TimeGrid::uniform(0.0, 1.0).is_err());
        assert!(TimeGrid::uniform(-0.1, 1.0).is_err());
    }

    #[test]
    fn floor_and_ceil_examples() {
        let g = TimeGrid::uniform(0.1, 1.0).unwrap();
        assert!((g.floor_node(0.25).unwrap() - 0.2).abs() < 1e-15);
        assert!((g.ceil_node(0.25).unwrap() - 0.3).abs() < 1e-15);
        let node = g.nodes()[2];
        assert_eq!(g.floor_node(node).unwrap(), node);
        assert_eq!(g.ceil_node(node).unwrap(), node);
        assert_eq!(g.floor_node(0.0).unwrap(), 0.0);
        assert_eq!(g.ceil_node(0.0).unwrap(), 0.0);
        assert!(matches!(g.floor_node(1.5), Err(Error::Range { .. })));
        assert!(g.ceil_node(-0.1).is_err());
    }

    #[test]
    fn geometric_grid_covers_horizon() {
        let g = TimeGrid::geometric(0.01, 1.5, 0.25, 2.0).unwrap();
        assert!(g.horizon() >= 2.0);
        assert!(g.mesh() <= 0.25);
        assert!(TimeGrid::geometric(0.5, 1.1, 2.0, 3.0).is_err());
    }

    #[test]
    fn refine_keeps_coarse_nodes() {
        let g = TimeGrid::uniform(0.1, 1.0).unwrap();
        let f = g.refine(4).unwrap();
        assert_eq!(f.len(), 41);
        for (k, &t) in g.nodes().iter().enumerate() {
            assert_eq!(f.nodes()[4 * k], t);
        }
        assert_eq!(f.coarsen(4).unwrap().nodes(), g.nodes());
    }

    fn random_grid() -> impl Strategy<Value = TimeGrid> {
        prop::collection::vec(0.001f64..1.0, 1..40).prop_map(|steps| {
            let mut nodes = vec![0.0];
            for s in steps {
                let last = *nodes.last().unwrap();
                nodes.push(last + s);
            }
            TimeGrid::from_nodes(nodes).unwrap()
        })
    }

    proptest! {
        #[test]
        fn projections_match_linear_scan(g in random_grid(), frac in 0.0f64..=1.0) {
            let t = frac * g.horizon();
            let phi = g.floor_node(t).unwrap();
            let phi_plus = g.ceil_node(t).unwrap();
            let scan_floor = g.nodes().iter().copied().filter(|&s| s <= t).fold(f64::MIN, f64::max);
            let scan_ceil = g.nodes().iter().copied().filter(|&s| s >= t).fold(f64::MAX, f64::min);
            prop_assert_eq!(phi, scan_floor);
            prop_assert_eq!(phi_plus, scan_ceil);
            prop_assert!(phi <= t && t <= phi_plus);
            prop_assert!(phi_plus - phi <= g.mesh());
            prop_assert_eq!(g.floor_node(phi).unwrap(), phi);
            let max_step = g.nodes().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            prop_assert_eq!(g.mesh(), max_step);
        }
    }
}
