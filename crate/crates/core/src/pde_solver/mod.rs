//! The regularized Dirichlet problem `𝒜_H(u) + εΔu = 0`,
//! `𝒜_H(u) = H_{p_i}(Du) H_{p_j}(Du) u_{x_i x_j}`, and its linearization.

mod checks;
pub mod linear;
mod linearized;
pub mod selling;
mod solve;
mod stencil;

pub use checks::{
    check_max_principle, interior_gradient_bound, max_gradient_on, GradientBoundReport, GradientSample,
    MaxPrincipleReport,
};
pub use linear::{LinearSolver, SparseMatrix, DEFAULT_DIRECT_LIMIT};
pub use linearized::{
    assemble_linearized, linearized_coefficients, LinearizationOptions, LinearizedStencil, NodeCoefficients,
};
pub use solve::{
    frozen_coefficient, harmonic_extension, residual_field, solve_regularized, Solution, SolverConfig, SolverProblem,
};
pub use stencil::{
    apply_rows, assemble_rows, build_row, check_monotone, split_system, CrossScheme, Matrix3,
    MonotonicityReport, StencilRow,
};

use crate::error::Result;
use crate::grid::{Grid, GridField};

/// Boundary data `x ↦ ⟨slope, x⟩ + offset` on every node.
pub fn affine_data(grid: Grid, slope: &[f64], offset: f64) -> Result<GridField> {
    GridField::from_fn(grid, |x| offset + x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>())
}

/// `x₁^{4/3} − x₂^{4/3}` with real cube roots, i.e. `|x₁|^{4/3} − |x₂|^{4/3}`,
/// an exact ∞-harmonic function.
pub fn aronsson_profile(x: &[f64]) -> f64 {
    x[0].abs().powf(4.0 / 3.0) - x[1].abs().powf(4.0 / 3.0)
}

pub fn aronsson_data(grid: Grid) -> Result<GridField> {
    GridField::from_fn(grid, aronsson_profile)
}
