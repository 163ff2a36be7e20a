//! Tabulated functions of the `n` projected coordinates.
//!
//! A grid function is a tensor of values on a rectangular node grid with
//! multilinear interpolation inside the bounds and constant (clamped)
//! extrapolation outside. Evaluation is therefore continuous and bounded by
//! the largest tabulated magnitude, which keeps the represented function
//! class inside the bounded measurable functions the theory works with.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular grid geometry: per-axis bounds and node counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != nodes.len() || lower.is_empty() {
            return Err(Error::InvalidConfig("grid axes are inconsistent".into()));
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) || nodes[i] < 2 {
                return Err(Error::InvalidConfig(format!(
                    "grid axis {i}: need lower < upper and at least 2 nodes"
                )));
            }
        }
        Ok(GridSpec { lower, upper, nodes })
    }

    /// Symmetric grid `[-half_width_i, +half_width_i]` with `nodes` per axis.
    pub fn symmetric(half_widths: &[f64], nodes: usize) -> Result<Self> {
        GridSpec::new(
            half_widths.iter().map(|w| -w).collect(),
            half_widths.to_vec(),
            vec![nodes; half_widths.len()],
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.nodes[axis] - 1) as f64
    }

    /// Coordinates of the flat node index (row-major, last axis fastest).
    pub fn node_coords(&self, flat: usize) -> DVector<f64> {
        let mut rem = flat;
        let dim = self.dim();
        let mut coords = DVector::zeros(dim);
        for axis in (0..dim).rev() {
            let idx = rem % self.nodes[axis];
            rem /= self.nodes[axis];
            coords[axis] = self.lower[axis] + idx as f64 * self.step(axis);
        }
        coords
    }

    /// True when the flat node index touches no boundary node on any axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let idx = rem % self.nodes[axis];
            rem /= self.nodes[axis];
            if idx == 0 || idx == self.nodes[axis] - 1 {
                return false;
            }
        }
        true
    }

    /// Per-axis cell index and interpolation fraction for a clamped point.
    fn locate(&self, axis: usize, x: f64) -> (usize, f64) {
        let clamped = x.clamp(self.lower[axis], self.upper[axis]);
        let step = self.step(axis);
        let pos = (clamped - self.lower[axis]) / step;
        let cell = (pos.floor() as usize).min(self.nodes[axis] - 2);
        (cell, (pos - cell as f64).clamp(0.0, 1.0))
    }

    /// Corner indices and multilinear weights at a point (2^dim corners).
    fn corners(&self, z: &DVector<f64>) -> Vec<(usize, f64)> {
        let dim = self.dim();
        let located: Vec<(usize, f64)> = (0..dim).map(|a| self.locate(a, z[a])).collect();
        let mut out = Vec::with_capacity(1 << dim);
        for corner in 0..(1usize << dim) {
            let mut flat = 0usize;
            let mut weight = 1.0;
            for axis in 0..dim {
                let (cell, frac) = located[axis];
                let hi = (corner >> axis) & 1 == 1;
                let idx = cell + hi as usize;
                weight *= if hi { frac } else { 1.0 - frac };
                flat = flat * self.nodes[axis] + idx;
            }
            if weight != 0.0 {
                out.push((flat, weight));
            }
        }
        out
    }
}

/// Real-valued grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_nodes() {
            return Err(Error::DimensionMismatch {
                expected: spec.total_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("grid values must be finite".into()));
        }
        Ok(ScalarGrid { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&DVector<f64>) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..spec.total_nodes()).map(|i| f(&spec.node_coords(i))).collect();
        ScalarGrid::new(spec, values)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Result<Self> {
        let n = spec.total_nodes();
        ScalarGrid::new(spec, vec![value; n])
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        self.spec.corners(z).iter().map(|&(i, w)| w * self.values[i]).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ScalarGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Vector-valued grid function (`value_dim` components per node, node-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorGrid {
    pub spec: GridSpec,
    pub value_dim: usize,
    pub values: Vec<f64>,
}

impl VectorGrid {
    pub fn new(spec: GridSpec, value_dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_nodes() * value_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.total_nodes() * value_dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("grid values must be finite".into()));
        }
        Ok(VectorGrid { spec, value_dim, values })
    }

    pub fn zeros(spec: GridSpec, value_dim: usize) -> Self {
        let n = spec.total_nodes() * value_dim;
        VectorGrid { spec, value_dim, values: vec![0.0; n] }
    }

    pub fn from_fn(
        spec: GridSpec,
        value_dim: usize,
        mut f: impl FnMut(&DVector<f64>) -> DVector<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.total_nodes() * value_dim);
        for i in 0..spec.total_nodes() {
            let v = f(&spec.node_coords(i));
            assert_eq!(v.len(), value_dim);
            values.extend(v.iter());
        }
        VectorGrid::new(spec, value_dim, values)
    }

    pub fn node_value(&self, flat: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.values[flat * self.value_dim..(flat + 1) * self.value_dim])
    }

    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.value_dim);
        for (i, w) in self.spec.corners(z) {
            for c in 0..self.value_dim {
                out[c] += w * self.values[i * self.value_dim + c];
            }
        }
        out
    }

    /// Largest component magnitude over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &VectorGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_1d() -> ScalarGrid {
        let spec = GridSpec::new(vec![-1.0], vec![1.0], vec![5]).unwrap();
        ScalarGrid::from_fn(spec, |z| 2.0 * z[0]).unwrap()
    }

    #[test]
    fn interpolation_is_exact_for_linear_functions() {
        let g = grid_1d();
        for &x in &[-0.9, -0.3, 0.0, 0.123, 0.77] {
            assert_relative_eq!(g.eval(&DVector::from_vec(vec![x])), 2.0 * x, epsilon = 1e-14);
        }
    }

    #[test]
    fn extrapolation_clamps_to_boundary_value() {
        let g = grid_1d();
        assert_relative_eq!(g.eval(&DVector::from_vec(vec![5.0])), 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.eval(&DVector::from_vec(vec![-5.0])), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn evaluation_is_bounded_by_sup_norm() {
        let spec = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 2.0], vec![4, 7]).unwrap();
        let g = ScalarGrid::from_fn(spec, |z| (3.0 * z[0]).sin() + z[1]).unwrap();
        let sup = g.sup_norm();
        for i in 0..200 {
            let x = -2.0 + 4.0 * (i as f64) / 199.0;
            let y = -3.0 + 6.0 * ((i * 7 % 200) as f64) / 199.0;
            assert!(g.eval(&DVector::from_vec(vec![x, y])).abs() <= sup + 1e-12);
        }
    }

    #[test]
    fn bilinear_matches_hand_computation() {
        let spec = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        // values at (0,0),(0,1),(1,0),(1,1) in row-major order
        let g = ScalarGrid::new(spec, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let v = g.eval(&DVector::from_vec(vec![0.5, 0.5]));
        assert_relative_eq!(v, (0.0 + 1.0 + 2.0 + 4.0) / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn vector_grid_round_trips_node_values() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![3]).unwrap();
        let g = VectorGrid::from_fn(spec, 2, |z| DVector::from_vec(vec![z[0], -z[0]])).unwrap();
        let mid = g.node_value(1);
        assert_relative_eq!(mid[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(mid[1], -0.5, epsilon = 1e-14);
    }
}
