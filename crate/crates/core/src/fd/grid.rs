use crate::error::{Error, Result};

/// Tensor grid `[lower_j, upper_j]` with `nodes_j >= 3` equally spaced nodes
/// per dimension. Flat node index is row-major (last dimension fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: if upper.len() != lower.len() { upper.len() } else { nodes.len() },
            });
        }
        for j in 0..lower.len() {
            if !(lower[j].is_finite() && upper[j].is_finite() && upper[j] > lower[j]) {
                return Err(Error::InvalidArgument(format!(
                    "grid bounds in dimension {j} must be finite with lower < upper"
                )));
            }
            if nodes[j] < 3 {
                return Err(Error::InvalidArgument(format!(
                    "grid needs at least 3 nodes per dimension, got {} in dimension {j}",
                    nodes[j]
                )));
            }
        }
        Ok(SpatialGrid { lower, upper, nodes })
    }

    /// Cube `center +- half_width` with the same node count in every dimension.
    pub fn centered(center: &[f64], half_width: f64, nodes: usize) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
            vec![nodes; center.len()],
        )
    }

    /// Smallest half-width keeping the boundary out of reach of the probe:
    /// `|x_probe|_inf + 5 sqrt(abar T) + 1`.
    pub fn truncation_half_width(probe: &[f64], abar: f64, horizon: f64) -> f64 {
        let reach = probe.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        reach + 5.0 * (abar.max(0.0) * horizon).sqrt() + 1.0
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self, j: usize) -> f64 {
        (self.upper[j] - self.lower[j]) / (self.nodes[j] - 1) as f64
    }

    pub fn stride(&self, j: usize) -> usize {
        self.nodes[j + 1..].iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = flat % self.nodes[j];
            flat /= self.nodes[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.nodes).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn coordinate(&self, j: usize, i: usize) -> f64 {
        self.lower[j] + i as f64 * self.dx(j)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(j, &i)| self.coordinate(j, i))
            .collect()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.nodes)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }

    /// Multilinear interpolation of nodal `values` at `x`; outside the box the
    /// outermost cell is extended linearly.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for j in 0..d {
            let s = (x[j] - self.lower[j]) / self.dx(j);
            let cell = s.floor().clamp(0.0, (self.nodes[j] - 2) as f64) as usize;
            base[j] = cell;
            frac[j] = s - cell as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for j in 0..d {
                let up = (corner >> (d - 1 - j)) & 1;
                w *= if up == 1 { frac[j] } else { 1.0 - frac[j] };
                flat = flat * self.nodes[j] + base[j] + up;
            }
            total += w * values[flat];
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_nodes() {
        assert!(SpatialGrid::new(vec![0.0], vec![1.0], vec![2]).is_err());
        assert!(SpatialGrid::new(vec![1.0], vec![1.0], vec![3]).is_err());
        assert!(SpatialGrid::new(vec![0.0], vec![f64::INFINITY], vec![3]).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = SpatialGrid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 5]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.point(7), vec![1.0 / 3.0, 0.0]);
        assert_eq!(g.stride(0), 5);
        assert!(g.is_boundary(0) && !g.is_boundary(7));
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_data() {
        let g = SpatialGrid::new(vec![0.0, -1.0], vec![2.0, 1.0], vec![5, 7]).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let v: Vec<f64> = (0..g.len()).map(|i| f(&g.point(i))).collect();
        for x in [[0.3, 0.2], [1.9, -0.95], [2.5, 1.4], [-1.0, 0.0]] {
            assert!((g.interpolate(&v, &x) - f(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_width() {
        assert_eq!(SpatialGrid::truncation_half_width(&[0.5], 1.0, 4.0), 11.5);
    }
}
