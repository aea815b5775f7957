use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, MAX_DIM};
use crate::pde_solver::{LinearSolver, LinearizedStencil, SparseMatrix, DEFAULT_DIRECT_LIMIT};

/// One transposed factorization shared by solves for different base points.
pub struct AdjointSolver<'a> {
    stencil: &'a LinearizedStencil,
    solver: LinearSolver,
    unknown: Vec<usize>,
    coupling: Vec<Vec<(usize, f64)>>,
}

/// `Θ` on the grid of `V`, the boundary density `ρ`, and `α_ε = H(Du(x₀))`.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    base_node: usize,
    theta: GridField,
    /// `(boundary node of V, ρ)`.
    rho: Vec<(usize, f64)>,
    alpha: f64,
    epsilon: f64,
}

impl<'a> AdjointSolver<'a> {
    pub fn new(stencil: &'a LinearizedStencil) -> Result<Self> {
        Self::with_direct_limit(stencil, DEFAULT_DIRECT_LIMIT)
    }

    pub fn with_direct_limit(stencil: &'a LinearizedStencil, direct_limit: usize) -> Result<Self> {
        if !stencil.monotonicity().is_monotone() {
            return Err(Error::numerical(
                format!(
                    "stencil violates the M-matrix conditions at {} nodes",
                    stencil.monotonicity().violating_nodes.len()
                ),
                vec![stencil.monotonicity().fraction],
            ));
        }
        let (matrix, unknown, coupling) = stencil.blocks()?;
        let solver = LinearSolver::new(matrix, direct_limit)?;
        Ok(Self {
            stencil,
            solver,
            unknown,
            coupling,
        })
    }

    pub fn stencil(&self) -> &LinearizedStencil {
        self.stencil
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.solver.matrix()
    }

    /// Solves for the base point nearest `x0`; `alpha` is `H(Du(x₀))`, recorded
    /// as given.
    pub fn solve(&self, x0: &[f64], alpha: f64) -> Result<AdjointSolution> {
        let grid = *self.stencil.grid();
        if x0.len() != grid.dim() {
            return Err(Error::Input("base point dimension mismatch".into()));
        }
        let base_node = grid.nearest(x0);
        let snapped = grid.point(base_node);
        if (0..grid.dim()).any(|k| (snapped[k] - x0[k]).abs() > 1e-9 * grid.spacing()) {
            return Err(Error::Input(format!("base point {x0:?} is not a grid node")));
        }
        if grid.is_boundary(base_node) {
            return Err(Error::Input(format!("base point {x0:?} lies on the boundary of V")));
        }
        let hn = grid.cell_volume();
        let mut rhs = vec![0.0; self.solver.matrix().size()];
        rhs[self.unknown[base_node]] = 1.0 / hn;
        let x = self
            .solver
            .solve_transpose(&rhs)
            .map_err(|e| Error::numerical(format!("transposed system is singular: {e}"), vec![]))?;
        let mut theta = vec![0.0; grid.len()];
        for (row, v) in self.stencil.rows().iter().zip(&x) {
            theta[row.node] = *v;
        }
        // (Bᵀ Θ)_b · hⁿ = −ρ_b · h^{n−1}
        let mut flux = vec![0.0; grid.len()];
        for (k, entries) in self.coupling.iter().enumerate() {
            for &(b, c) in entries {
                flux[b] += c * x[k];
            }
        }
        let w = grid.face_weight();
        let rho = grid
            .boundary()
            .into_iter()
            .map(|b| (b, -flux[b] * hn / w))
            .collect();
        Ok(AdjointSolution {
            base_node,
            theta: GridField::new(grid, theta)?.with_label("theta"),
            rho,
            alpha,
            epsilon: self.stencil.epsilon(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfReport {
    pub checked: usize,
    pub min_inward_difference: f64,
    pub pass: bool,
}

/// Comparison of the discrete `ρ` with
/// `⟨∇H(Du), DΘ⟩²/|DΘ| + ε|DΘ|` from one-sided normal differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryDensityDiagnostic {
    pub discrete_mass: f64,
    pub continuum_mass: f64,
    /// `Σ |ρ − ρ_formula| w` over face nodes.
    pub l1_difference: f64,
}

impl AdjointSolution {
    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    pub fn base_node(&self) -> usize {
        self.base_node
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.grid().point_vec(self.base_node)
    }

    pub fn theta(&self) -> &GridField {
        &self.theta
    }

    pub fn rho(&self) -> &[(usize, f64)] {
        &self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn surface_weight(&self) -> f64 {
        self.grid().face_weight()
    }

    pub fn min_theta(&self) -> f64 {
        self.theta.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ Θ hⁿ`.
    pub fn theta_mass(&self) -> f64 {
        self.theta.values().iter().sum::<f64>() * self.grid().cell_volume()
    }

    /// `Σ_b ρ_b h^{n−1}`.
    pub fn boundary_mass(&self) -> f64 {
        self.rho.iter().map(|r| r.1).sum::<f64>() * self.surface_weight()
    }

    /// `Σ_b v_b ρ_b h^{n−1}`.
    pub fn boundary_average(&self, v: &GridField) -> Result<f64> {
        if !v.grid().same_shape(self.grid()) {
            return Err(Error::Input("field does not live on the grid of V".into()));
        }
        Ok(self.rho.iter().map(|&(b, r)| v.values()[b] * r).sum::<f64>() * self.surface_weight())
    }

    /// Inward differences of `Θ` at boundary face nodes (edges and corners
    /// excluded) are ≥ 0.
    pub fn hopf_check(&self) -> HopfReport {
        let grid = *self.grid();
        let mut min: f64 = f64::INFINITY;
        let mut checked = 0;
        for b in grid.boundary() {
            if let Some(inward) = inward_neighbor(&grid, b) {
                min = min.min(self.theta.values()[inward] - self.theta.values()[b]);
                checked += 1;
            }
        }
        HopfReport {
            checked,
            min_inward_difference: min,
            pass: min >= -1e-12,
        }
    }

    /// `q(b)` is `∇H(Du)` at the boundary node `b` of V.
    pub fn boundary_density_diagnostic(&self, q: impl Fn(usize) -> Result<[f64; MAX_DIM]>) -> Result<BoundaryDensityDiagnostic> {
        let grid = *self.grid();
        let n = grid.dim();
        let h = grid.spacing();
        let w = self.surface_weight();
        let mut continuum_mass = 0.0;
        let mut l1 = 0.0;
        for &(b, rho) in &self.rho {
            let Some(inward) = inward_neighbor(&grid, b) else { continue };
            let slope = (self.theta.values()[inward] - self.theta.values()[b]) / h;
            let m_b = grid.multi_index(b);
            let m_in = grid.multi_index(inward);
            let axis = (0..n).find(|&k| m_b[k] != m_in[k]).unwrap();
            let qv = q(b)?;
            let formula = slope * (qv[axis] * qv[axis] + self.epsilon);
            continuum_mass += formula * w;
            l1 += (rho - formula).abs() * w;
        }
        Ok(BoundaryDensityDiagnostic {
            discrete_mass: self.boundary_mass(),
            continuum_mass,
            l1_difference: l1,
        })
    }
}

/// The interior neighbor across the unique face containing `b`, or `None`
/// for edge and corner nodes.
fn inward_neighbor(grid: &Grid, b: usize) -> Option<usize> {
    let m = grid.multi_index(b);
    let mut face = None;
    for k in 0..grid.dim() {
        let last = grid.counts()[k] - 1;
        if m[k] == 0 || m[k] == last {
            if face.is_some() {
                return None;
            }
            face = Some((k, if m[k] == 0 { 1i64 } else { -1 }));
        }
    }
    let (k, dir) = face?;
    let mut off = [0i64; MAX_DIM];
    off[k] = dir;
    grid.shifted(b, &off[..grid.dim()])
}

/// `|Σ_int L_ε(v) Θ hⁿ + Σ_∂ v ρ h^{n−1} − v(x₀)|`.
pub fn duality_check(v: &GridField, adjoint: &AdjointSolution, stencil: &LinearizedStencil) -> Result<f64> {
    if !v.grid().same_shape(adjoint.grid()) || !stencil.grid().same_shape(adjoint.grid()) {
        return Err(Error::Input("field, stencil and adjoint grids must coincide".into()));
    }
    let lv = stencil.apply(v)?;
    let interior: f64 = lv
        .values()
        .iter()
        .zip(adjoint.theta.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * adjoint.grid().cell_volume();
    Ok((interior + adjoint.boundary_average(v)? - v.values()[adjoint.base_node]).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianModel;
    use crate::pde_solver::{
        affine_data, assemble_linearized, solve_regularized, LinearizationOptions, SolverConfig, SolverProblem,
    };
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inner() -> Vec<(f64, f64)> {
        vec![(-0.5, 0.5), (-0.5, 0.5)]
    }

    fn smooth_setup(count: usize) -> (HamiltonianModel, GridField, LinearizedStencil) {
        let model = HamiltonianModel::anisotropic(nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.5])).unwrap();
        let grid = Grid::cube(2, 1.0, count).unwrap();
        let g = GridField::from_fn(grid, |x| 0.8 * x[1] + 0.3 * (1.3 * x[0]).sin() * x[1]).unwrap();
        let problem = SolverProblem::new(&model, g, 0.1, SolverConfig::default()).unwrap();
        let u = solve_regularized(&problem).unwrap().field;
        let options = LinearizationOptions {
            domain: Some(inner()),
            ..LinearizationOptions::default()
        };
        let stencil = assemble_linearized(&u, &model, 0.1, &options).unwrap();
        (model, u, stencil)
    }

    #[test]
    fn green_function_is_nonnegative_with_unit_boundary_mass_and_exact_duality() {
        let (_, _, stencil) = smooth_setup(33);
        let solver = AdjointSolver::new(&stencil).unwrap();
        let adj = solver.solve(&[0.125, -0.0625], 0.3).unwrap();
        assert!(adj.min_theta() >= -1e-12);
        assert!((adj.boundary_mass() - 1.0).abs() <= 1e-10);
        assert!(adj.rho().iter().all(|r| r.1 >= -1e-12));
        assert!(adj.hopf_check().pass);
        let grid = *stencil.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = GridField::new(grid, values).unwrap();
            assert!(duality_check(&v, &adj, &stencil).unwrap() <= 1e-10);
        }
        assert!(duality_check(&GridField::constant(grid, 1.0), &adj, &stencil).unwrap() <= 1e-10);
    }

    #[test]
    fn affine_state_gives_reflection_symmetric_green_function() {
        let model = HamiltonianModel::quadratic(2).unwrap();
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let u = affine_data(grid, &[0.0, 1.0], 0.0).unwrap();
        let options = LinearizationOptions {
            domain: Some(inner()),
            ..LinearizationOptions::default()
        };
        let stencil = assemble_linearized(&u, &model, 0.05, &options).unwrap();
        let adj = AdjointSolver::new(&stencil).unwrap().solve(&[0.0, 0.0], 0.5).unwrap();
        let v = *adj.grid();
        let t = adj.theta().values();
        let c = v.counts()[1] - 1;
        for k in 0..v.len() {
            let m = v.multi_index(k);
            let mirror = v.index(&[m[0], c - m[1]]);
            assert!((t[k] - t[mirror]).abs() <= 1e-9 * t.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn transposed_products_agree() {
        let (_, _, stencil) = smooth_setup(17);
        let solver = AdjointSolver::new(&stencil).unwrap();
        let m = solver.matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..m.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..m.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs: f64 = m.mul(&a).iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(m.mul_transpose(&b)).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0) * 1e3);
    }

    #[test]
    fn base_point_must_be_an_interior_node() {
        let (_, _, stencil) = smooth_setup(17);
        let solver = AdjointSolver::new(&stencil).unwrap();
        assert!(matches!(solver.solve(&[0.5, 0.0], 0.3), Err(Error::Input(_))));
        assert!(matches!(solver.solve(&[0.01, 0.0], 0.3), Err(Error::Input(_))));
    }

    #[test]
    fn continuum_density_formula_is_close_to_the_discrete_flux() {
        let (model, u, stencil) = smooth_setup(33);
        let adj = AdjointSolver::new(&stencil).unwrap().solve(&[0.0, 0.0], 0.3).unwrap();
        let (_, map) = u.grid().subgrid(&inner()).unwrap();
        let d = adj
            .boundary_density_diagnostic(|b| {
                let jets = crate::adjoint::node_jets(&u, &model, &[map[b]])?;
                Ok(jets[0].q)
            })
            .unwrap();
        assert!((d.continuum_mass - 1.0).abs() < 0.2, "{d:?}");
    }
}
