//! Stability of the regularized solutions under mollification of `H`.

use nalgebra::DVector;
use serde::Serialize;

use crate::barriers::boundary_lipschitz;
use crate::error::{Error, Result};
use crate::grid::{gradient_at, GridField};
use crate::hamiltonian::{mollify, Hamiltonian, HamiltonianModel};
use crate::pde_solver::{solve_regularized, SolverConfig, SolverProblem};

/// Consecutive distances below this are treated as converged.
pub const DISTANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySample {
    pub gamma: f64,
    /// `max H^γ(Du)` over all nodes.
    pub max_energy: f64,
    /// Sup distance to the solution of the previous `γ`.
    pub distance_to_previous: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    pub lipschitz: f64,
    pub upper_convexity: f64,
    pub c_emp: f64,
    /// `C_emp·Λ·Lip(g)²`.
    pub energy_bound: f64,
    pub samples: Vec<StabilitySample>,
    pub energy_bounded: bool,
    pub distances_decreasing: bool,
    pub pass: bool,
}

/// `max H(Du)` over every node of `u`, boundary nodes by one-sided differences.
pub fn max_energy(model: &dyn Hamiltonian, u: &GridField) -> Result<f64> {
    let grid = u.grid();
    let n = grid.dim();
    let mut max = f64::NEG_INFINITY;
    for k in 0..grid.len() {
        let du = DVector::from_column_slice(&gradient_at(grid, u.values(), k)[..n]);
        max = max.max(model.value(&du)?);
    }
    Ok(max)
}

/// Solves with `H^γ` for each `γ` of a decreasing sweep at fixed `ε` and data.
pub fn stability_check(
    base: &HamiltonianModel,
    gammas: &[f64],
    g: &GridField,
    epsilon: f64,
    c_emp: f64,
    solver: &SolverConfig,
) -> Result<StabilityReport> {
    if gammas.is_empty() || gammas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("γ sweep must be strictly decreasing, got {gammas:?}")));
    }
    let lipschitz = boundary_lipschitz(g);
    let upper = base.bounds().upper;
    let energy_bound = c_emp * upper * lipschitz * lipschitz;
    let mut samples = Vec::with_capacity(gammas.len());
    let mut previous: Option<GridField> = None;
    for &gamma in gammas {
        let model = mollify(base, gamma)?;
        let problem = SolverProblem::new(&model, g.clone(), epsilon, *solver)?;
        let solution = solve_regularized(&problem)?;
        let u = solution.field;
        samples.push(StabilitySample {
            gamma,
            max_energy: max_energy(&model, &u)?,
            distance_to_previous: previous.as_ref().map(|p| p.sup_distance(&u)).transpose()?,
            iterations: solution.iterations,
        });
        previous = Some(u);
    }
    let energy_bounded = samples.iter().all(|s| s.max_energy <= energy_bound);
    let distances: Vec<f64> = samples.iter().filter_map(|s| s.distance_to_previous).collect();
    let distances_decreasing = distances
        .windows(2)
        .all(|w| w[1] < w[0] || w[1] <= DISTANCE_FLOOR);
    Ok(StabilityReport {
        epsilon,
        lipschitz,
        upper_convexity: upper,
        c_emp,
        energy_bound,
        samples,
        energy_bounded,
        distances_decreasing,
        pass: energy_bounded && distances_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn data(scale: f64) -> GridField {
        let grid = Grid::cube(2, 1.0, 25).unwrap();
        GridField::from_fn(grid, |x| scale * (0.7 * x[0] + 0.3 * (2.0 * x[1]).sin())).unwrap()
    }

    #[test]
    fn quadratic_mollification_is_exact() {
        let base = HamiltonianModel::quadratic(2).unwrap();
        let r = stability_check(&base, &[0.2, 0.1, 0.05], &data(1.0), 0.1, 1.0, &SolverConfig::default())
            .unwrap();
        assert!(r.pass, "{r:?}");
        for s in &r.samples[1..] {
            assert!(s.distance_to_previous.unwrap() <= 1e-10);
        }
    }

    #[test]
    fn energy_scales_quadratically() {
        let base = HamiltonianModel::quadratic(2).unwrap();
        let one = stability_check(&base, &[0.1], &data(1.0), 0.1, 1.0, &SolverConfig::default()).unwrap();
        let two = stability_check(&base, &[0.1], &data(2.0), 0.1, 1.0, &SolverConfig::default()).unwrap();
        let growth = two.samples[0].max_energy / one.samples[0].max_energy;
        assert!(growth <= 4.4 && growth > 3.0, "{growth}");
    }

    #[test]
    fn rejects_increasing_sweep() {
        let base = HamiltonianModel::quadratic(2).unwrap();
        assert!(matches!(
            stability_check(&base, &[0.1, 0.2], &data(1.0), 0.1, 1.0, &SolverConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
