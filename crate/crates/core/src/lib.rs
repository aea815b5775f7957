//! `amlab` is a desk-scale laboratory for absolute minimizers of L∞ functionals
//! `ess sup H(Du)` with a strongly convex Hamiltonian `H`.
//!
//! The pipeline mirrors the vanishing-viscosity construction used in regularity
//! theory for the Aronsson equation:
//!
//! * [`hamiltonian`]: model Hamiltonians, their mollification, Legendre
//!   transform and generalized cones;
//! * [`grid`]: uniform Cartesian grids, fields and finite differences;
//! * [`pde_solver`]: the regularized Dirichlet problem
//!   `H_{p_i}(Du) H_{p_j}(Du) u_{x_i x_j} + ε Δu = 0` and its linearization;
//! * [`adjoint`]: the adjoint Green's function of the linearized operator, its
//!   boundary density and the exponential integral estimates built on it;
//! * [`barriers`]: discounted optimal-control distances used as boundary barriers;
//! * [`experiments`]: flatness, stability and blow-up harnesses;
//! * [`cli`]: run configuration, scenario dispatch and artifact emission.

pub mod adjoint;
pub mod barriers;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod hamiltonian;
pub mod pde_solver;

pub use error::{Error, Result};
