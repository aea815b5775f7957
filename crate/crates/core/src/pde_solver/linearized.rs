//! The linearization `L_ε v = −H_{p_i}H_{p_j} v_{x_i x_j}
//! − 2 H_{p_i p_l} u_{x_i x_j} H_{p_j} v_{x_l} − εΔv` at a frozen field `u`.

use nalgebra::DVector;
use serde::Serialize;

use super::linear::{LinearSolver, SparseMatrix};
use super::stencil::{
    apply_rows, assemble_rows, check_monotone, split_system, CrossScheme, Matrix3, MonotonicityReport, StencilRow,
};
use crate::error::{Error, Result};
use crate::grid::{gradient_at, hessian_at, Grid, GridField, MAX_DIM};
use crate::hamiltonian::Hamiltonian;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationOptions {
    pub scheme: CrossScheme,
    /// Assembly fails when more than this fraction of rows is non-monotone.
    pub max_violation_fraction: f64,
    /// Restrict the operator to the nodes of this sub-box (must lie strictly
    /// inside the field's box).
    pub domain: Option<Vec<(f64, f64)>>,
}

impl Default for LinearizationOptions {
    fn default() -> Self {
        Self {
            scheme: CrossScheme::Selling,
            max_violation_fraction: 0.05,
            domain: None,
        }
    }
}

/// Frozen coefficients at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeCoefficients {
    pub second_order: Matrix3,
    pub drift: [f64; MAX_DIM],
    /// `+1`/`−1`: forward/backward difference used for `b_l`; `0` if `b_l = 0`.
    pub upwind: [i8; MAX_DIM],
}

/// Sparse discrete `L_ε` over the interior nodes of its grid.
#[derive(Debug, Clone)]
pub struct LinearizedStencil {
    grid: Grid,
    epsilon: f64,
    rows: Vec<StencilRow>,
    coefficients: Vec<NodeCoefficients>,
    monotonicity: MonotonicityReport,
}

/// Coefficients of `L_ε` from centered derivatives of `u` at a node interior
/// to `u`'s grid.
pub fn linearized_coefficients(
    model: &dyn Hamiltonian,
    grid: &Grid,
    values: &[f64],
    node: usize,
    epsilon: f64,
) -> Result<NodeCoefficients> {
    let n = grid.dim();
    let g = gradient_at(grid, values, node);
    let d2u = hessian_at(grid, values, node);
    let e = model.eval(&DVector::from_column_slice(&g[..n]))?;
    let q = &e.gradient;
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut upwind = [0i8; MAX_DIM];
    // w = D²u · q
    let mut w = [0.0; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            w[i] += d2u[i][j] * q[j];
        }
    }
    for l in 0..n {
        for j in 0..n {
            a[l][j] = q[l] * q[j];
        }
        a[l][l] += epsilon;
        b[l] = 2.0 * (0..n).map(|i| e.hessian[(i, l)] * w[i]).sum::<f64>();
        upwind[l] = if b[l] > 0.0 {
            1
        } else if b[l] < 0.0 {
            -1
        } else {
            0
        };
    }
    Ok(NodeCoefficients {
        second_order: a,
        drift: b,
        upwind,
    })
}

/// Assembles `L_ε` at the frozen field `u`.
pub fn assemble_linearized(
    u: &GridField,
    model: &dyn Hamiltonian,
    epsilon: f64,
    options: &LinearizationOptions,
) -> Result<LinearizedStencil> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("ε must be positive, got {epsilon}")));
    }
    let full = *u.grid();
    if model.dim() != full.dim() {
        return Err(Error::Input("model and field dimensions differ".into()));
    }
    let (grid, map) = match &options.domain {
        Some(bounds) => full.subgrid(bounds)?,
        None => (full, (0..full.len()).collect()),
    };
    let nodes = grid.interior();
    if nodes.iter().any(|&k| full.is_boundary(map[k])) {
        return Err(Error::Input("linearization nodes must be interior to the field's grid".into()));
    }
    let coefficients: Vec<NodeCoefficients> = nodes
        .iter()
        .map(|&k| linearized_coefficients(model, &full, u.values(), map[k], epsilon))
        .collect::<Result<_>>()?;
    let position: std::collections::HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let rows = assemble_rows(&grid, &nodes, options.scheme, |k| {
        let c = &coefficients[position[&k]];
        Ok((c.second_order, c.drift))
    })?;
    let monotonicity = check_monotone(&rows);
    if monotonicity.fraction > options.max_violation_fraction {
        return Err(Error::numerical(
            format!(
                "{} of {} rows violate the M-matrix sign conditions (fraction {:.3} > {:.3}); refine the grid",
                monotonicity.violating_nodes.len(),
                monotonicity.checked,
                monotonicity.fraction,
                options.max_violation_fraction
            ),
            vec![monotonicity.fraction],
        ));
    }
    Ok(LinearizedStencil {
        grid,
        epsilon,
        rows,
        coefficients,
        monotonicity,
    })
}

impl LinearizedStencil {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rows(&self) -> &[StencilRow] {
        &self.rows
    }

    /// Coefficients aligned with `rows()`.
    pub fn coefficients(&self) -> &[NodeCoefficients] {
        &self.coefficients
    }

    pub fn monotonicity(&self) -> &MonotonicityReport {
        &self.monotonicity
    }

    /// `L_ε v` at interior nodes, 0 on the boundary.
    pub fn apply(&self, v: &GridField) -> Result<GridField> {
        if !v.grid().same_shape(&self.grid) {
            return Err(Error::Input("field grid does not match the stencil grid".into()));
        }
        apply_rows(&self.rows, v)
    }

    /// Interior block `M` (rows/columns in `rows()` order) and the coupling
    /// `B` to boundary nodes: `(L v)_interior = M v_interior + B v_boundary`.
    pub fn blocks(&self) -> Result<(SparseMatrix, Vec<usize>, Vec<Vec<(usize, f64)>>)> {
        let (m, _, unknown) = split_system(&self.grid, &self.rows, &vec![0.0; self.grid.len()])?;
        let mut coupling = vec![Vec::new(); self.rows.len()];
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, c) in &row.entries {
                if unknown[j] == usize::MAX {
                    coupling[k].push((j, c));
                }
            }
        }
        Ok((m, unknown, coupling))
    }

    /// Solves `L_ε v = f` at interior nodes with `v = g` on the boundary.
    pub fn solve_dirichlet(&self, f: &[f64], g: &[f64], direct_limit: usize) -> Result<Vec<f64>> {
        let (matrix, mut rhs, _) = split_system(&self.grid, &self.rows, g)?;
        for (k, row) in self.rows.iter().enumerate() {
            rhs[k] += f[row.node];
        }
        let x = LinearSolver::new(matrix, direct_limit)?.solve(&rhs)?;
        let mut out = g.to_vec();
        for (row, v) in self.rows.iter().zip(x) {
            out[row.node] = v;
        }
        Ok(out)
    }
}
