//! The adjoint of the linearized operator: Green's function `Θ` for
//! `L*_ε Θ = δ_{x₀}` in `V`, `Θ = 0` on `∂V`, its boundary density `ρ`, and
//! the integral estimates built on the duality identity
//! `∫_V L_ε(v) Θ + ∫_{∂V} v ρ = v(x₀)`.

mod estimates;
mod green;

pub use estimates::{
    integral_estimates, log_slope_fit, node_jets, EmpiricalConstants, EstimateEntry, EstimateParameters,
    EstimateReport, NodeJet, SlopeFit,
};
pub use green::{
    duality_check, AdjointSolution, AdjointSolver, BoundaryDensityDiagnostic, HopfReport,
};
