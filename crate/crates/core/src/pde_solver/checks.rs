//! Reports on solved fields: maximum principle and interior gradient bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient_at, GridField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub max_abs_solution: f64,
    pub max_abs_boundary: f64,
    pub pass: bool,
}

/// `max|u| ≤ max_{∂U}|g| + 1e-10`.
pub fn check_max_principle(u: &GridField, g: &GridField) -> Result<MaxPrincipleReport> {
    if !u.grid().same_shape(g.grid()) {
        return Err(Error::Input("solution and boundary data live on different grids".into()));
    }
    let max_abs_solution = u.max_abs();
    let max_abs_boundary = g
        .grid()
        .boundary()
        .into_iter()
        .map(|k| g.values()[k].abs())
        .fold(0.0, f64::max);
    Ok(MaxPrincipleReport {
        max_abs_solution,
        max_abs_boundary,
        pass: max_abs_solution <= max_abs_boundary + 1e-10,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientSample {
    pub epsilon: f64,
    pub max_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientBoundReport {
    pub samples: Vec<GradientSample>,
    pub max: f64,
    pub median: f64,
    /// `(max − min)/max` over the sweep.
    pub spread: f64,
    pub pass: bool,
}

/// Largest `|Du|` (centered differences) over the nodes of the sub-box.
pub fn max_gradient_on(u: &GridField, inner: &[(f64, f64)]) -> Result<f64> {
    let grid = *u.grid();
    let (_, map) = grid.subgrid(inner)?;
    let n = grid.dim();
    Ok(map
        .into_iter()
        .map(|k| {
            let g = gradient_at(&grid, u.values(), k);
            g[..n].iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

/// Interior gradient bound over an ε-sweep; passes iff max ≤ 2 × median.
pub fn interior_gradient_bound(sweep: &[(f64, &GridField)], inner: &[(f64, f64)]) -> Result<GradientBoundReport> {
    if sweep.is_empty() {
        return Err(Error::Input("empty ε-sweep".into()));
    }
    for (_, u) in sweep {
        let grid = u.grid();
        let strictly_inside = inner.iter().enumerate().all(|(k, &(a, b))| {
            a > grid.lower()[k] && b < grid.upper()[k]
        });
        if inner.len() != grid.dim() || !strictly_inside {
            return Err(Error::Input("inner box must lie strictly inside the domain".into()));
        }
    }
    let samples: Vec<GradientSample> = sweep
        .iter()
        .map(|&(epsilon, u)| Ok(GradientSample { epsilon, max_gradient: max_gradient_on(u, inner)? }))
        .collect::<Result<_>>()?;
    let mut values: Vec<f64> = samples.iter().map(|s| s.max_gradient).collect();
    values.sort_by(f64::total_cmp);
    let max = *values.last().unwrap();
    let min = values[0];
    let mid = values.len() / 2;
    let median = if values.len() % 2 == 1 { values[mid] } else { 0.5 * (values[mid - 1] + values[mid]) };
    Ok(GradientBoundReport {
        spread: if max > 0.0 { (max - min) / max } else { 0.0 },
        pass: max <= 2.0 * median,
        samples,
        max,
        median,
    })
}
