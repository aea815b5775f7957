//! Discounted optimal-control distances `ℒ^δ_σ` and the barrier checks built on
//! them.

mod checks;
mod control;

pub use checks::{
    boundary_lipschitz, boundary_lipschitz_check, cone_sandwich_check, minimal_sigma,
    sample_boundary_nodes, semiconcavity_proxy, LipschitzReport, Reflected, SandwichFailure,
    SandwichReport, SandwichSlack,
};
pub use control::{
    admissible_discount, control_distance, default_discount, control_distance_with, straight_line_cost,
    BarrierField, BarrierOptions, DirectionSet,
};
