//! Frozen-coefficient Picard iteration for `𝒜_H(u) + εΔu = 0`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::linear::{LinearSolver, DEFAULT_DIRECT_LIMIT};
use super::stencil::{assemble_rows, build_row, split_system, CrossScheme, Matrix3, StencilRow};
use rayon::prelude::*;
use crate::error::{Error, Result};
use crate::grid::{gradient_at, Grid, GridField, MAX_DIM};
use crate::hamiltonian::Hamiltonian;

const MIN_DAMPING: f64 = 1.0 / 64.0;
/// Growth of `ω` after a step that decreased the residual, capped at the
/// configured damping.
const DAMPING_RECOVERY: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm bound on the discrete residual at interior nodes.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial damping `ω`: `u ← (1−ω) u + ω · (linear solve)`.
    pub damping: f64,
    /// Finish with Newton-type steps on the linearized operator.
    pub newton_finish: bool,
    /// Reach small `ε` through a ladder of larger ones.
    pub continuation: bool,
    pub scheme: CrossScheme,
    /// Largest system factored directly; bigger ones use BiCGSTAB.
    pub direct_limit: usize,
    /// Fraction of non-monotone rows tolerated before assembly fails.
    pub max_violation_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 500,
            damping: 0.7,
            newton_finish: true,
            continuation: false,
            scheme: CrossScheme::Selling,
            direct_limit: DEFAULT_DIRECT_LIMIT,
            max_violation_fraction: 0.05,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_violation_fraction) {
            return Err(Error::Config("max_violation_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A Dirichlet problem on the box of `boundary.grid()`; only the boundary
/// values of `boundary` are read.
#[derive(Debug, Clone)]
pub struct SolverProblem<'a> {
    pub model: &'a dyn Hamiltonian,
    pub boundary: GridField,
    pub epsilon: f64,
    pub config: SolverConfig,
}

impl<'a> SolverProblem<'a> {
    pub fn new(model: &'a dyn Hamiltonian, boundary: GridField, epsilon: f64, config: SolverConfig) -> Result<Self> {
        if epsilon == 0.0 {
            return Err(Error::Config(
                "ε = 0 is the unregularized problem, which is not solved directly".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Config(format!("ε must lie in (0, 1], got {epsilon}")));
        }
        if model.dim() != boundary.grid().dim() {
            return Err(Error::Input(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim(),
                boundary.grid().dim()
            )));
        }
        config.validate()?;
        Ok(Self {
            model,
            boundary,
            epsilon,
            config,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.boundary.grid()
    }
}

/// Result of a converged solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridField,
    pub iterations: usize,
    /// Residual sup-norm before each outer step, ending with the final one.
    pub residual_history: Vec<f64>,
    pub newton_steps: usize,
    /// Intermediate solves of the ε-continuation.
    pub continuation_steps: usize,
}

impl Solution {
    pub fn residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

/// `a = ∇H(Du) ⊗ ∇H(Du) + εI` at an interior node, with centered `Du`.
pub fn frozen_coefficient(model: &dyn Hamiltonian, grid: &Grid, values: &[f64], node: usize, epsilon: f64) -> Result<Matrix3> {
    let n = grid.dim();
    let g = gradient_at(grid, values, node);
    let q = model.eval(&DVector::from_column_slice(&g[..n]))?.gradient;
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = q[i] * q[j];
        }
        a[i][i] += epsilon;
    }
    Ok(a)
}

fn picard_rows(problem: &SolverProblem<'_>, values: &[f64], interior: &[usize]) -> Result<Vec<StencilRow>> {
    let grid = *problem.grid();
    assemble_rows(&grid, interior, problem.config.scheme, |node| {
        Ok((frozen_coefficient(problem.model, &grid, values, node, problem.epsilon)?, [0.0; MAX_DIM]))
    })
}

/// Sup-norm of `a(Du) : D²ₕu` over the rows (rows carry the minus sign).
fn residual_of(rows: &[StencilRow], values: &[f64]) -> f64 {
    rows.iter().map(|r| r.apply(values).abs()).fold(0.0, f64::max)
}

/// `𝒜(u) + εΔu` as discretized by the solver, at interior nodes (0 on the
/// boundary).
pub fn residual_field(problem: &SolverProblem<'_>, u: &GridField) -> Result<GridField> {
    if !u.grid().same_shape(problem.grid()) {
        return Err(Error::Input("field grid does not match the problem grid".into()));
    }
    let rows = picard_rows(problem, u.values(), &problem.grid().interior())?;
    let mut out = vec![0.0; u.grid().len()];
    for row in &rows {
        out[row.node] = -row.apply(u.values());
    }
    GridField::new(*u.grid(), out)
}

fn l2_of(rows: &[StencilRow], values: &[f64]) -> f64 {
    rows.iter().map(|r| r.apply(values).powi(2)).sum::<f64>().sqrt()
}

fn solve_rows(grid: &Grid, rows: &[StencilRow], boundary: &[f64], direct_limit: usize) -> Result<Vec<f64>> {
    let (matrix, rhs, _) = split_system(grid, rows, boundary)?;
    let x = LinearSolver::new(matrix, direct_limit)?.solve(&rhs)?;
    let mut out = boundary.to_vec();
    for (row, v) in rows.iter().zip(x) {
        out[row.node] = v;
    }
    Ok(out)
}

/// Discrete harmonic extension of the boundary values.
pub fn harmonic_extension(boundary: &GridField, direct_limit: usize) -> Result<GridField> {
    let grid = *boundary.grid();
    let mut identity = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in identity.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let rows = assemble_rows(&grid, &grid.interior(), CrossScheme::Selling, |_| Ok((identity, [0.0; MAX_DIM])))?;
    GridField::new(grid, solve_rows(&grid, &rows, boundary.values(), direct_limit)?)
}

/// Solves the regularized problem; the boundary trace of the result equals
/// the input boundary values exactly.
///
/// With `continuation` on and `ε` below [`CONTINUATION_START`], the problem is
/// first solved along `ε_k = CONTINUATION_START / 2^k`, each solve starting
/// from the previous one.
pub fn solve_regularized(problem: &SolverProblem<'_>) -> Result<Solution> {
    let grid = *problem.grid();
    let cfg = problem.config;
    let mut boundary = problem.boundary.values().to_vec();
    for node in grid.interior() {
        boundary[node] = 0.0;
    }
    let mut u = harmonic_extension(&GridField::new(grid, boundary)?, cfg.direct_limit)?.into_values();
    let mut rungs = 0;
    if cfg.continuation {
        let mut eps = CONTINUATION_START;
        while eps > problem.epsilon * 1.5 {
            let rung = SolverProblem {
                epsilon: eps,
                config: SolverConfig {
                    tolerance: cfg.tolerance.max(CONTINUATION_TOLERANCE),
                    ..cfg
                },
                ..problem.clone()
            };
            u = iterate(&rung, u).u;
            rungs += 1;
            eps *= 0.5;
        }
    }
    let outcome = iterate(problem, u);
    if outcome.converged {
        finish(grid, outcome, rungs, problem)
    } else {
        let residual = outcome.history.last().copied().unwrap_or(f64::NAN);
        Err(Error::numerical(
            match outcome.failure {
                Some(reason) => reason,
                None => format!(
                    "no convergence after {} iterations (residual {residual:e}, tolerance {:e})",
                    cfg.max_iterations, cfg.tolerance
                ),
            },
            outcome.history,
        ))
    }
}

/// Largest `ε` of the continuation ladder.
pub const CONTINUATION_START: f64 = 0.1;
const CONTINUATION_TOLERANCE: f64 = 1e-6;

struct Outcome {
    u: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
    newton_steps: usize,
    converged: bool,
    failure: Option<String>,
}

fn iterate(problem: &SolverProblem<'_>, mut u: Vec<f64>) -> Outcome {
    let grid = *problem.grid();
    let cfg = problem.config;
    let interior = grid.interior();
    let mut omega = cfg.damping;
    let mut history = Vec::new();
    let mut newton_steps = 0;
    let fail = |u: Vec<f64>, iterations, history, newton_steps, reason: String| Outcome {
        u,
        iterations,
        history,
        newton_steps,
        converged: false,
        failure: Some(reason),
    };
    let mut rows = match picard_rows(problem, &u, &interior) {
        Ok(r) => r,
        Err(e) => return fail(u, 0, history, 0, e.to_string()),
    };
    let mut residual = residual_of(&rows, &u);
    history.push(residual);
    for iteration in 0..=cfg.max_iterations {
        if residual <= cfg.tolerance {
            return Outcome {
                u,
                iterations: iteration,
                history,
                newton_steps,
                converged: true,
                failure: None,
            };
        }
        if iteration == cfg.max_iterations {
            break;
        }
        let mut advanced = false;
        if cfg.newton_finish {
            match newton_step(problem, &u, &rows, residual) {
                Ok(Some((v, r, next))) => {
                    u = v;
                    rows = next;
                    residual = r;
                    newton_steps += 1;
                    advanced = true;
                }
                Ok(None) => {}
                Err(e) => return fail(u, iteration, history, newton_steps, e.to_string()),
            }
        }
        if !advanced {
            let x = match solve_rows(&grid, &rows, &u, cfg.direct_limit) {
                Ok(x) => x,
                Err(e) => return fail(u, iteration, history, newton_steps, e.to_string()),
            };
            for &node in &interior {
                u[node] = (1.0 - omega) * u[node] + omega * x[node];
            }
            rows = match picard_rows(problem, &u, &interior) {
                Ok(r) => r,
                Err(e) => return fail(u, iteration, history, newton_steps, e.to_string()),
            };
            let next = residual_of(&rows, &u);
            omega = if next > residual {
                (omega * 0.5).max(MIN_DAMPING)
            } else {
                (omega * DAMPING_RECOVERY).min(cfg.damping)
            };
            residual = next;
        }
        history.push(residual);
        if !residual.is_finite() {
            return fail(u, iteration + 1, history, newton_steps, "residual became non-finite".into());
        }
    }
    Outcome {
        u,
        iterations: cfg.max_iterations,
        history,
        newton_steps,
        converged: false,
        failure: None,
    }
}

fn finish(grid: Grid, outcome: Outcome, continuation_steps: usize, problem: &SolverProblem<'_>) -> Result<Solution> {
    let mut u = outcome.u;
    for node in grid.boundary() {
        u[node] = problem.boundary.values()[node];
    }
    Ok(Solution {
        field: GridField::new(grid, u)?,
        iterations: outcome.iterations,
        residual_history: outcome.history,
        newton_steps: outcome.newton_steps,
        continuation_steps,
    })
}

/// Damped Newton step on the discrete residual `N(u) = rows(u)·u`.
///
/// The Jacobian is the frozen row plus the sensitivity of the row to the
/// coefficient vector `q = ∇H(Du)`, differenced in `q` and chained through
/// `D²H` and centered differences of `δ`. Accepted only if the residual drops.
fn newton_step(
    problem: &SolverProblem<'_>,
    u: &[f64],
    rows: &[StencilRow],
    residual: f64,
) -> Result<Option<(Vec<f64>, f64, Vec<StencilRow>)>> {
    let grid = *problem.grid();
    let n = grid.dim();
    let h = grid.spacing();
    let eps = problem.epsilon;
    let scheme = problem.config.scheme;
    let jacobian: Vec<StencilRow> = rows
        .par_iter()
        .map(|row| -> Result<StencilRow> {
            let node = row.node;
            let g = gradient_at(&grid, u, node);
            let e = problem.model.eval(&DVector::from_column_slice(&g[..n]))?;
            let q: Vec<f64> = e.gradient.iter().copied().collect();
            let action = |q: &[f64]| -> f64 {
                let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] = q[i] * q[j];
                    }
                    a[i][i] += eps;
                }
                build_row(&grid, node, &a, &[0.0; MAX_DIM], scheme).apply(u)
            };
            let mut dn_dq = [0.0; MAX_DIM];
            for l in 0..n {
                let t = 1e-6 * (1.0 + q[l].abs());
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[l] += t;
                qm[l] -= t;
                dn_dq[l] = (action(&qp) - action(&qm)) / (2.0 * t);
            }
            let mut entries = row.entries.clone();
            for l in 0..n {
                let d: f64 = (0..n).map(|k| dn_dq[k] * e.hessian[(k, l)]).sum();
                let s = grid.stride(l);
                entries.push((node + s, d / (2.0 * h)));
                entries.push((node - s, -d / (2.0 * h)));
            }
            Ok(StencilRow { node, entries })
        })
        .collect::<Result<_>>()?;
    let zeros = vec![0.0; grid.len()];
    let (matrix, _, _) = split_system(&grid, &jacobian, &zeros)?;
    let rhs: Vec<f64> = rows.iter().map(|r| -r.apply(u)).collect();
    let delta = match LinearSolver::new(matrix, problem.config.direct_limit).and_then(|s| s.solve(&rhs)) {
        Ok(d) => d,
        Err(_) => return Ok(None),
    };
    let interior: Vec<usize> = rows.iter().map(|r| r.node).collect();
    let merit = l2_of(rows, u);
    let mut step = 1.0;
    for _ in 0..6 {
        let mut v = u.to_vec();
        for (&node, d) in interior.iter().zip(&delta) {
            v[node] += step * d;
        }
        let next_rows = picard_rows(problem, &v, &interior)?;
        let r = residual_of(&next_rows, &v);
        if l2_of(&next_rows, &v) < merit || r < residual {
            return Ok(Some((v, r, next_rows)));
        }
        step *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{mollify, HamiltonianModel};
    use crate::pde_solver::{affine_data, aronsson_data, aronsson_profile, check_max_principle};

    #[test]
    fn affine_data_is_reproduced_in_every_dimension() {
        for n in 1..=3 {
            let model = HamiltonianModel::separable_power_on_box(n, 4.0, 3.0).unwrap();
            let smooth = mollify(&model, 0.2).unwrap();
            let grid = Grid::cube(n, 1.0, if n == 3 { 9 } else { 17 }).unwrap();
            let mut slope = vec![0.0; n];
            slope[n - 1] = 1.0;
            let g = affine_data(grid, &slope, 0.0).unwrap();
            for eps in [1.0, 0.1, 0.01] {
                let problem = SolverProblem::new(&smooth, g.clone(), eps, SolverConfig::default()).unwrap();
                let sol = solve_regularized(&problem).unwrap();
                assert!(sol.field.sup_distance(&g).unwrap() <= 1e-12, "n={n} eps={eps}");
                assert!(sol.residual() <= 1e-9);
            }
        }
    }

    #[test]
    fn two_point_problem_in_one_dimension() {
        let model = HamiltonianModel::quadratic(1).unwrap();
        let grid = Grid::new(&[(0.0, 1.0)], &[41]).unwrap();
        let g = affine_data(grid, &[1.0], 0.0).unwrap();
        let problem = SolverProblem::new(&model, g.clone(), 0.1, SolverConfig::default()).unwrap();
        let sol = solve_regularized(&problem).unwrap();
        assert!(sol.field.sup_distance(&g).unwrap() < 1e-10);
        assert!(sol.residual() < 1e-10);
    }

    #[test]
    fn zero_epsilon_is_a_config_error() {
        let model = HamiltonianModel::quadratic(1).unwrap();
        let g = affine_data(Grid::cube(1, 1.0, 5).unwrap(), &[1.0], 0.0).unwrap();
        assert!(matches!(
            SolverProblem::new(&model, g, 0.0, SolverConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_convergence_carries_the_history() {
        let model = HamiltonianModel::quadratic(2).unwrap();
        let g = aronsson_data(Grid::cube(2, 1.0, 17).unwrap()).unwrap();
        let config = SolverConfig { max_iterations: 2, ..SolverConfig::default() };
        let problem = SolverProblem::new(&model, g, 0.01, config).unwrap();
        match solve_regularized(&problem) {
            Err(Error::Numerical { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }

    #[test]
    fn coarse_aronsson_solve_is_close_and_obeys_the_max_principle() {
        let model = HamiltonianModel::quadratic(2).unwrap();
        let grid = Grid::cube(2, 1.0, 25).unwrap();
        let g = aronsson_data(grid).unwrap();
        for newton_finish in [false, true] {
            let config = SolverConfig { newton_finish, ..SolverConfig::default() };
            let problem = SolverProblem::new(&model, g.clone(), 0.05, config).unwrap();
            let sol = solve_regularized(&problem).unwrap();
            let exact = GridField::from_fn(grid, aronsson_profile).unwrap();
            let err = sol.field.sup_distance(&exact).unwrap();
            eprintln!("newton={newton_finish} iterations={} err={err}", sol.iterations);
            assert!(err < 0.1);
            assert!(check_max_principle(&sol.field, &g).unwrap().pass);
        }
    }
}
