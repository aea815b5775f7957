use nalgebra::{DMatrix, DVector};

use super::{Grid, MAX_DIM};
use crate::error::{Error, Result};

/// One finite scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
    label: Option<String>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite field value at node {i}")));
        }
        Ok(Self {
            grid,
            values,
            label: None,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim()]))
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self − other|` over all nodes.
    pub fn sup_distance(&self, other: &GridField) -> Result<f64> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::Input("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Values at the nodes of a subgrid (see [`Grid::subgrid`]).
    pub fn restrict(&self, bounds: &[(f64, f64)]) -> Result<GridField> {
        let (sub, map) = self.grid.subgrid(bounds)?;
        let values = map.iter().map(|&i| self.values[i]).collect();
        Ok(GridField {
            grid: sub,
            values,
            label: self.label.clone(),
        })
    }

    /// Multilinear interpolation; points outside the box are an input error.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let n = g.dim();
        let h = g.spacing();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..n {
            let t = (x[k] - g.lower()[k]) / h;
            let last = (g.counts()[k] - 1) as f64;
            if !(t >= -1e-9 && t <= last + 1e-9) {
                return Err(Error::Input(format!(
                    "interpolation point {:?} outside the grid box",
                    &x[..n]
                )));
            }
            let t = t.clamp(0.0, last);
            let i = (t.floor() as usize).min(g.counts()[k] - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut m = base;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    m[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.index(&m)];
            }
        }
        Ok(acc)
    }
}

/// An `n`-vector per node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub(crate) grid: Grid,
    pub(crate) data: Vec<f64>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, node: usize) -> DVector<f64> {
        let n = self.grid.dim();
        DVector::from_column_slice(&self.data[node * n..(node + 1) * n])
    }

    pub fn slice(&self, node: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.data[node * n..(node + 1) * n]
    }

    pub fn component(&self, axis: usize) -> GridField {
        let n = self.grid.dim();
        let values = (0..self.grid.len()).map(|i| self.data[i * n + axis]).collect();
        GridField {
            grid: self.grid,
            values,
            label: None,
        }
    }
}

/// A symmetric `n×n` matrix per node, stored node-major, row-major per node.
/// Only interior nodes carry meaningful values; boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub(crate) grid: Grid,
    pub(crate) data: Vec<f64>,
}

impl MatrixField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, node: usize) -> DMatrix<f64> {
        let n = self.grid.dim();
        DMatrix::from_row_slice(n, n, &self.data[node * n * n..(node + 1) * n * n])
    }

    pub fn component(&self, i: usize, j: usize) -> GridField {
        let n = self.grid.dim();
        let values = (0..self.grid.len())
            .map(|k| self.data[k * n * n + i * n + j])
            .collect();
        GridField {
            grid: self.grid,
            values,
            label: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let g = Grid::cube(1, 1.0, 5).unwrap();
        assert!(GridField::new(g, vec![0.0; 4]).is_err());
        assert!(GridField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn interpolation_exact_on_bilinear() {
        let g = Grid::cube(2, 1.0, 9).unwrap();
        let f = GridField::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]).unwrap();
        for p in [[0.13, -0.71], [1.0, 1.0], [-1.0, 0.3], [0.0, 0.0]] {
            let exact = 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
            assert!((f.interpolate(&p).unwrap() - exact).abs() < 1e-14);
        }
        assert!(f.interpolate(&[1.2, 0.0]).is_err());
    }

    #[test]
    fn restrict_keeps_values() {
        let g = Grid::cube(2, 2.0, 21).unwrap();
        let f = GridField::from_fn(g, |x| x[0] * 10.0 + x[1]).unwrap();
        let r = f.restrict(&[(-1.0, 1.0), (0.0, 2.0)]).unwrap();
        for i in 0..r.grid().len() {
            let x = r.grid().point(i);
            assert!((r.values()[i] - (x[0] * 10.0 + x[1])).abs() < 1e-12);
        }
    }
}
