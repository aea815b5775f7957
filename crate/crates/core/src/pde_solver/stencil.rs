//! Monotone finite-difference rows for `−a : D²v − b · Dv` at interior nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::SparseMatrix;
use super::selling;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, MAX_DIM};

/// Discretization of the second-order term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossScheme {
    /// Wide stencil from Selling's decomposition of `a`; monotone for every
    /// positive definite `a`.
    #[default]
    Selling,
    /// Compact 7-point splitting where `a` is diagonally dominant, the plain
    /// 4-point centered cross otherwise (not monotone there).
    Centered,
}

pub type Matrix3 = [[f64; MAX_DIM]; MAX_DIM];

/// One discrete equation: `Σ coeff · v(node)` over full-grid node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilRow {
    pub node: usize,
    pub entries: Vec<(usize, f64)>,
}

impl StencilRow {
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn diagonal(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == self.node)
            .map(|e| e.1)
            .sum()
    }
}

/// Nodes whose rows break the sign conditions of an M-matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub violating_nodes: Vec<usize>,
    pub fraction: f64,
    /// Largest positive off-diagonal entry relative to the diagonal.
    pub worst_ratio: f64,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violating_nodes.is_empty()
    }
}

pub fn check_monotone(rows: &[StencilRow]) -> MonotonicityReport {
    let mut violating = Vec::new();
    let mut worst: f64 = 0.0;
    for row in rows {
        let diag = row.diagonal();
        let mut sum = 0.0;
        let mut ok = diag > 0.0;
        for &(j, c) in &row.entries {
            sum += c;
            if j != row.node && c > 1e-12 * diag.abs() {
                ok = false;
                worst = worst.max(c / diag.abs().max(f64::MIN_POSITIVE));
            }
        }
        if sum.abs() > 1e-9 * diag.abs() {
            ok = false;
        }
        if !ok {
            violating.push(row.node);
        }
    }
    let fraction = if rows.is_empty() { 0.0 } else { violating.len() as f64 / rows.len() as f64 };
    MonotonicityReport {
        checked: rows.len(),
        violating_nodes: violating,
        fraction,
        worst_ratio: worst,
    }
}

/// Builds the row of `−a : D²v − b · Dv` at an interior node of `grid`.
pub fn build_row(grid: &Grid, node: usize, a: &Matrix3, b: &[f64; MAX_DIM], scheme: CrossScheme) -> StencilRow {
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(32);
    let h = grid.spacing();
    match scheme {
        CrossScheme::Selling => selling_terms(grid, node, a, &mut entries),
        CrossScheme::Centered => centered_terms(grid, node, a, &mut entries),
    }
    for l in 0..grid.dim() {
        let s = grid.stride(l);
        let c = b[l].abs() / h;
        if c == 0.0 {
            continue;
        }
        let nb = if b[l] > 0.0 { node + s } else { node - s };
        entries.push((node, c));
        entries.push((nb, -c));
    }
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (j, c) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => merged.push((j, c)),
        }
    }
    merged.retain(|e| e.1 != 0.0 || e.0 == node);
    StencilRow { node, entries: merged }
}

/// Where the ray `m + t·v` (index units, `t ∈ (0, 1]`) first meets the
/// boundary, as interpolation weights over grid nodes.
fn arm(grid: &Grid, m: &[usize; MAX_DIM], v: &[i64; 3]) -> (f64, Vec<(usize, f64)>) {
    let n = grid.dim();
    let mut t: f64 = 1.0;
    for k in 0..n {
        if v[k] > 0 {
            t = t.min((grid.counts()[k] - 1 - m[k]) as f64 / v[k] as f64);
        } else if v[k] < 0 {
            t = t.min(m[k] as f64 / (-v[k]) as f64);
        }
    }
    if t >= 1.0 {
        let mut idx = [0usize; MAX_DIM];
        for k in 0..n {
            idx[k] = (m[k] as i64 + v[k]) as usize;
        }
        return (1.0, vec![(grid.index(&idx[..n]), 1.0)]);
    }
    // position of the hit point; faces reached are snapped exactly
    let mut lo = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for k in 0..n {
        let last = grid.counts()[k] - 1;
        let p = m[k] as f64 + t * v[k] as f64;
        let reached = (v[k] > 0 && (last - m[k]) as f64 == t * v[k] as f64)
            || (v[k] < 0 && m[k] as f64 == t * (-v[k]) as f64);
        let p = if reached { p.round() } else { p.clamp(0.0, last as f64) };
        let f = p.floor().min((last - 1) as f64);
        lo[k] = f as usize;
        frac[k] = p - f;
    }
    let mut weights = Vec::with_capacity(1 << n);
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = [0usize; MAX_DIM];
        for k in 0..n {
            let up = corner >> k & 1 == 1;
            w *= if up { frac[k] } else { 1.0 - frac[k] };
            idx[k] = lo[k] + up as usize;
        }
        if w != 0.0 {
            weights.push((grid.index(&idx[..n]), w));
        }
    }
    (t, weights)
}

fn selling_terms(grid: &Grid, node: usize, a: &Matrix3, entries: &mut Vec<(usize, f64)>) {
    let h2 = grid.spacing() * grid.spacing();
    let m = grid.multi_index(node);
    for term in selling::decompose(a, grid.dim()) {
        let v = term.offset;
        let w = [-v[0], -v[1], -v[2]];
        let (tp, fwd) = arm(grid, &m, &v);
        let (tm, bwd) = arm(grid, &m, &w);
        let cp = 2.0 * term.weight / (tp * (tp + tm) * h2);
        let cm = 2.0 * term.weight / (tm * (tp + tm) * h2);
        entries.push((node, cp + cm));
        for (j, wt) in fwd {
            entries.push((j, -cp * wt));
        }
        for (j, wt) in bwd {
            entries.push((j, -cm * wt));
        }
    }
}

fn centered_terms(grid: &Grid, node: usize, a: &Matrix3, entries: &mut Vec<(usize, f64)>) {
    let n = grid.dim();
    let h2 = grid.spacing() * grid.spacing();
    let dominant = (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i][j].abs()).sum();
        a[i][i] >= off
    });
    for i in 0..n {
        let si = grid.stride(i);
        let mut axis = a[i][i];
        if dominant {
            axis -= (0..n).filter(|&j| j != i).map(|j| a[i][j].abs()).sum::<f64>();
        }
        entries.push((node, 2.0 * axis / h2));
        entries.push((node + si, -axis / h2));
        entries.push((node - si, -axis / h2));
        for j in i + 1..n {
            let sj = grid.stride(j);
            let c = a[i][j];
            if c == 0.0 {
                continue;
            }
            if dominant {
                // 7-point splitting along the diagonal matching the sign of c
                let (p, q) = if c > 0.0 {
                    (node + si + sj, node - si - sj)
                } else {
                    (node + si - sj, node - si + sj)
                };
                let c = c.abs();
                entries.push((node, 2.0 * c / h2));
                entries.push((p, -c / h2));
                entries.push((q, -c / h2));
                // the splitting also loads the axis neighbours of both axes
                entries.push((node + si, 0.0));
                entries.push((node - si, 0.0));
                entries.push((node + sj, 0.0));
                entries.push((node - sj, 0.0));
            } else {
                let w = 2.0 * c / (4.0 * h2);
                entries.push((node + si + sj, -w));
                entries.push((node - si - sj, -w));
                entries.push((node + si - sj, w));
                entries.push((node - si + sj, w));
            }
        }
    }
}

/// Interior rows of a linear operator with per-node coefficients.
pub fn assemble_rows<F>(grid: &Grid, nodes: &[usize], scheme: CrossScheme, coefficients: F) -> Result<Vec<StencilRow>>
where
    F: Fn(usize) -> Result<(Matrix3, [f64; MAX_DIM])> + Sync,
{
    nodes
        .par_iter()
        .map(|&node| {
            let (a, b) = coefficients(node)?;
            Ok(build_row(grid, node, &a, &b, scheme))
        })
        .collect()
}

/// Splits rows into the interior block (over `unknown` numbering) and the
/// right-hand side contributed by known boundary values.
pub fn split_system(
    grid: &Grid,
    rows: &[StencilRow],
    boundary_values: &[f64],
) -> Result<(SparseMatrix, Vec<f64>, Vec<usize>)> {
    let mut unknown = vec![usize::MAX; grid.len()];
    for (k, row) in rows.iter().enumerate() {
        unknown[row.node] = k;
    }
    let mut matrix_rows = Vec::with_capacity(rows.len());
    let mut rhs = Vec::with_capacity(rows.len());
    for row in rows {
        let mut r = Vec::with_capacity(row.entries.len());
        let mut b = 0.0;
        for &(j, c) in &row.entries {
            match unknown[j] {
                usize::MAX => b -= c * boundary_values[j],
                k => r.push((k, c)),
            }
        }
        matrix_rows.push(r);
        rhs.push(b);
    }
    Ok((SparseMatrix::from_rows(matrix_rows)?, rhs, unknown))
}

/// Applies rows to a field; non-row nodes get 0.
pub fn apply_rows(rows: &[StencilRow], field: &GridField) -> Result<GridField> {
    let mut out = vec![0.0; field.grid().len()];
    for row in rows {
        if row.entries.iter().any(|e| e.0 >= out.len()) {
            return Err(Error::Input("stencil does not match field grid".into()));
        }
        out[row.node] = row.apply(field.values());
    }
    GridField::new(*field.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_form(grid: &Grid, a: &Matrix3) -> GridField {
        let n = grid.dim();
        GridField::from_fn(*grid, |x| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += 0.5 * a[i][j] * x[i] * x[j];
                }
            }
            s
        })
        .unwrap()
    }

    #[test]
    fn selling_rows_are_exact_on_quadratics_up_to_the_boundary() {
        // a : D²(½ xᵀ a x) = tr(a²); rows include ray-shortened arms
        let grid = Grid::cube(2, 1.0, 41).unwrap();
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let eps = 0.01;
        let a = [[c * c + eps, c * s, 0.0], [c * s, s * s + eps, 0.0], [0.0; 3]];
        let b = [[1.0, 0.3, 0.0], [0.3, 2.0, 0.0], [0.0; 3]];
        let u = quadratic_form(&grid, &b);
        let expect: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| a[i][j] * b[i][j]).sum();
        let rows = assemble_rows(&grid, &grid.interior(), CrossScheme::Selling, |_| Ok((a, [0.0; 3]))).unwrap();
        assert!(check_monotone(&rows).is_monotone());
        for row in &rows {
            let m = grid.multi_index(row.node);
            if m[..2].iter().all(|&k| (12..=28).contains(&k)) {
                assert!((-row.apply(u.values()) - expect).abs() < 1e-9, "node {}", row.node);
            }
        }
        let affine = GridField::from_fn(grid, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        for row in &rows {
            assert!(row.apply(affine.values()).abs() < 1e-10);
        }
    }

    #[test]
    fn centered_cross_flags_non_dominant_nodes() {
        let grid = Grid::cube(2, 1.0, 9).unwrap();
        let a = [[1.0, 1.5, 0.0], [1.5, 3.0, 0.0], [0.0; 3]];
        let rows = assemble_rows(&grid, &grid.interior(), CrossScheme::Centered, |_| Ok((a, [0.0; 3]))).unwrap();
        let report = check_monotone(&rows);
        assert_eq!(report.fraction, 1.0);
        let dominant = [[1.0, 0.4, 0.0], [0.4, 1.0, 0.0], [0.0; 3]];
        let rows = assemble_rows(&grid, &grid.interior(), CrossScheme::Centered, |_| Ok((dominant, [0.0; 3]))).unwrap();
        assert!(check_monotone(&rows).is_monotone());
        let u = quadratic_form(&grid, &[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]]);
        for row in &rows {
            assert!((-row.apply(u.values()) - 0.8).abs() < 1e-10);
        }
    }

    #[test]
    fn upwind_drift_is_monotone_and_kills_constants() {
        let grid = Grid::cube(3, 1.0, 5).unwrap();
        let a = [[1.0, 0.2, 0.1], [0.2, 1.0, -0.3], [0.1, -0.3, 1.0]];
        let b = [3.0, -2.0, 0.5];
        let rows = assemble_rows(&grid, &grid.interior(), CrossScheme::Selling, |_| Ok((a, b))).unwrap();
        assert!(check_monotone(&rows).is_monotone());
        let ones = GridField::constant(grid, 1.0);
        let out = apply_rows(&rows, &ones).unwrap();
        assert!(out.max_abs() < 1e-12);
    }
}
