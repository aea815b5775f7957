//! Uniform Cartesian grids on boxes in dimension 1–3.

mod field;
pub mod io;
mod ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{GridField, MatrixField, VectorField};
pub use ops::{gradient, gradient_at, hessian, hessian_at};

pub const MAX_DIM: usize = 3;

/// A box `Π [aᵢ, bᵢ]` with the same spacing `h` along every axis.
///
/// Nodes are numbered row-major: the last axis varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
    spacing: f64,
}

impl Grid {
    /// Builds a grid with `counts[i]` nodes along axis `i`. The spacings
    /// `(bᵢ − aᵢ)/(countᵢ − 1)` must agree to `1e-12` (relative).
    pub fn new(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("grid dimension must be 1..=3, got {dim}")));
        }
        if counts.len() != dim {
            return Err(Error::Config("one node count per axis required".into()));
        }
        let mut lower = [0.0; MAX_DIM];
        let mut upper = [0.0; MAX_DIM];
        let mut c = [1; MAX_DIM];
        let mut spacing = None::<f64>;
        for (axis, (&(a, b), &count)) in bounds.iter().zip(counts).enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::Config(format!("degenerate extent [{a}, {b}] on axis {axis}")));
            }
            if count < 3 {
                return Err(Error::Config(format!("axis {axis} needs at least 3 nodes, got {count}")));
            }
            let h = (b - a) / (count - 1) as f64;
            if let Some(h0) = spacing {
                if (h - h0).abs() > 1e-12 * h0.max(h) {
                    return Err(Error::Config(format!(
                        "unequal spacing: axis 0 has h = {h0}, axis {axis} has h = {h}"
                    )));
                }
            } else {
                spacing = Some(h);
            }
            lower[axis] = a;
            upper[axis] = b;
            c[axis] = count;
        }
        Ok(Self {
            dim,
            lower,
            upper,
            counts: c,
            spacing: spacing.expect("dim ≥ 1"),
        })
    }

    /// `[-r, r]ⁿ` with `count` nodes per axis.
    pub fn cube(dim: usize, half_width: f64, count: usize) -> Result<Self> {
        Self::new(&vec![(-half_width, half_width); dim], &vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim).map(|k| (self.lower[k], self.upper[k])).collect()
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `hⁿ`, the volume attached to a node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// `hⁿ⁻¹`, the surface weight attached to a boundary node.
    pub fn face_weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32 - 1)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..self.dim].iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert!((0..self.dim).all(|k| multi[k] < self.counts[k]));
        self.index_unchecked(multi)
    }

    fn index_unchecked(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for k in 0..self.dim {
            idx = idx * self.counts[k] + multi[k];
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            out[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        out
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing
        }
    }

    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = self.coord(k, m[k]);
        }
        x
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        self.point(idx)[..self.dim].to_vec()
    }

    /// A node is on the boundary iff some index is extremal.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|k| m[k] == 0 || m[k] + 1 == self.counts[k])
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }

    pub fn boundary(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Node shifted by an integer offset, if it stays on the grid.
    pub fn shifted(&self, idx: usize, offset: &[i64]) -> Option<usize> {
        let m = self.multi_index(idx);
        let mut out = [0usize; MAX_DIM];
        for k in 0..self.dim {
            let j = m[k] as i64 + offset[k];
            if j < 0 || j >= self.counts[k] as i64 {
                return None;
            }
            out[k] = j as usize;
        }
        Some(self.index_unchecked(&out))
    }

    /// Nearest node to a point (clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut m = [0usize; MAX_DIM];
        for k in 0..self.dim {
            let t = ((x[k] - self.lower[k]) / self.spacing).round();
            m[k] = t.clamp(0.0, (self.counts[k] - 1) as f64) as usize;
        }
        self.index_unchecked(&m)
    }

    /// The sub-box of nodes lying in `bounds` (within `1e-9·h`), returned as a
    /// grid plus, for each of its nodes, the index of the same node here.
    pub fn subgrid(&self, bounds: &[(f64, f64)]) -> Result<(Grid, Vec<usize>)> {
        if bounds.len() != self.dim {
            return Err(Error::Input("sub-box dimension mismatch".into()));
        }
        let h = self.spacing;
        let mut first = [0usize; MAX_DIM];
        let mut sub_bounds = Vec::with_capacity(self.dim);
        let mut sub_counts = Vec::with_capacity(self.dim);
        for (k, &(a, b)) in bounds.iter().enumerate() {
            let ia = ((a - self.lower[k]) / h).round();
            let ib = ((b - self.lower[k]) / h).round();
            if (self.lower[k] + ia * h - a).abs() > 1e-9 * h
                || (self.lower[k] + ib * h - b).abs() > 1e-9 * h
            {
                return Err(Error::Input(format!(
                    "sub-box face on axis {k} does not fall on grid nodes"
                )));
            }
            if ia < 0.0 || ib > (self.counts[k] - 1) as f64 || ib - ia < 2.0 {
                return Err(Error::Input(format!("sub-box on axis {k} is outside the grid or too thin")));
            }
            first[k] = ia as usize;
            sub_bounds.push((self.coord(k, ia as usize), self.coord(k, ib as usize)));
            sub_counts.push((ib - ia) as usize + 1);
        }
        let sub = Grid::new(&sub_bounds, &sub_counts)?;
        let map = (0..sub.len())
            .map(|j| {
                let m = sub.multi_index(j);
                let mut g = [0usize; MAX_DIM];
                for k in 0..self.dim {
                    g[k] = m[k] + first[k];
                }
                self.index_unchecked(&g)
            })
            .collect();
        Ok((sub, map))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.counts == other.counts
            && (0..self.dim).all(|k| {
                (self.lower[k] - other.lower[k]).abs() <= 1e-12 * self.spacing
                    && (self.upper[k] - other.upper[k]).abs() <= 1e-12 * self.spacing
            })
    }
}
