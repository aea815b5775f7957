use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::AdjointSolution;
use crate::error::{Error, Result};
use crate::grid::{gradient_at, hessian_at, GridField, MAX_DIM};
use crate::hamiltonian::Hamiltonian;

/// Pointwise quantities built from `u` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeJet {
    /// `H(Du)`.
    pub h: f64,
    /// `∇H(Du)`.
    pub q: [f64; MAX_DIM],
    /// `D[H(Du)] = D²u ∇H(Du)`.
    pub dh: [f64; MAX_DIM],
    /// `⟨D²H D[H(Du)], D[H(Du)]⟩`.
    pub curvature: f64,
    /// `H_{p_k p_s} u_{x_k x_i} u_{x_s x_i}`.
    pub hessian_energy: f64,
}

/// Jets at nodes interior to `u`'s grid (centered differences).
pub fn node_jets(u: &GridField, model: &dyn Hamiltonian, nodes: &[usize]) -> Result<Vec<NodeJet>> {
    let grid = *u.grid();
    let n = grid.dim();
    nodes
        .iter()
        .map(|&k| {
            if grid.is_boundary(k) {
                return Err(Error::Input("jets need nodes interior to the field's grid".into()));
            }
            let g = gradient_at(&grid, u.values(), k);
            let d2u = hessian_at(&grid, u.values(), k);
            let e = model.eval(&DVector::from_column_slice(&g[..n]))?;
            let mut q = [0.0; MAX_DIM];
            let mut dh = [0.0; MAX_DIM];
            for i in 0..n {
                q[i] = e.gradient[i];
            }
            for i in 0..n {
                dh[i] = (0..n).map(|j| d2u[i][j] * q[j]).sum();
            }
            let mut curvature = 0.0;
            let mut hessian_energy = 0.0;
            for a in 0..n {
                for b in 0..n {
                    curvature += e.hessian[(a, b)] * dh[a] * dh[b];
                    for i in 0..n {
                        hessian_energy += e.hessian[(a, b)] * d2u[a][i] * d2u[b][i];
                    }
                }
            }
            Ok(NodeJet {
                h: e.value,
                q,
                dh,
                curvature,
                hessian_energy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParameters {
    pub mu: f64,
    pub beta: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub slack: f64,
}

/// Constants of the exponential integral bounds, which are not explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConstants {
    /// `C` in `∫_{H≤β} Θ ≤ C ε⁻¹ e^{μ(β−α)/ε}`.
    pub exponential: f64,
    /// `C'` in `∫ Θ ≤ C ε⁻¹ e^{−μα/(2ε)} + C'/α²`.
    pub mass: f64,
}

impl Default for EmpiricalConstants {
    fn default() -> Self {
        Self {
            exponential: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub parameters: EstimateParameters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub entries: Vec<EstimateEntry>,
}

impl EstimateReport {
    pub fn entry(&self, name: &str) -> Option<&EstimateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Discrete versions of the integral estimates for `Θ`:
///
/// * `hessian-energy`: `Σ [⟨D²H D[H], D[H]⟩ + ε H_pp u_xx u_xx] Θ hⁿ ≤ ‖H(Du)‖_∞`
/// * `exponential-weight`: the three-term `e^{μ(α−H)/ε}`-weighted sum `≤ 2ε`
/// * `h-squared`: `Σ H² Θ hⁿ ≤ ‖u‖² + (2/η)‖u‖²‖H‖ + 4(Λη/λ)² Σ Θ hⁿ`
/// * `sublevel-mass`: `Σ_{H≤β} Θ hⁿ ≤ C ε⁻¹ e^{μ(β−α)/ε}`
/// * `total-mass`: `Σ Θ hⁿ ≤ C ε⁻¹ e^{−μα/(2ε)} + C'/α²`
///
/// Sup-norms are taken over the nodes of V. An entry passes iff
/// `lhs ≤ rhs (1 + slack)`.
#[allow(clippy::too_many_arguments)]
pub fn integral_estimates(
    adjoint: &AdjointSolution,
    u: &GridField,
    model: &dyn Hamiltonian,
    mu: f64,
    beta: f64,
    eta: f64,
    slack: f64,
    constants: EmpiricalConstants,
) -> Result<EstimateReport> {
    let grid = *adjoint.grid();
    let n = grid.dim();
    let eps = adjoint.epsilon();
    let alpha = adjoint.alpha();
    let bounds = model.bounds();
    let mu_max = bounds.lower / (8.0 * n as f64);
    if !(mu > 0.0 && mu < mu_max) {
        return Err(Error::Config(format!("μ must lie in (0, λ/(8n)) = (0, {mu_max}), got {mu}")));
    }
    if !(beta > 0.0 && beta < alpha) {
        return Err(Error::Config(format!("β must lie in (0, α_ε) = (0, {alpha}), got {beta}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Config(format!("η must be positive, got {eta}")));
    }
    let (_, map) = u.grid().subgrid(&grid.bounds())?;
    let jets = node_jets(u, model, &map)?;
    let theta = adjoint.theta().values();
    let hn = grid.cell_volume();
    let h_sup = jets.iter().map(|j| j.h).fold(0.0, f64::max);
    let u_sup = map.iter().map(|&k| u.values()[k].abs()).fold(0.0, f64::max);
    let weight = |j: &NodeJet| (mu * (alpha - j.h) / eps).exp();
    let mut energy = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    let mut h2 = 0.0;
    let mut sublevel = 0.0;
    for (k, j) in jets.iter().enumerate() {
        let t = theta[k] * hn;
        if t == 0.0 {
            continue;
        }
        energy += (j.curvature + eps * j.hessian_energy) * t;
        t2 += mu * weight(j) * j.curvature * t;
        t3 += eps * mu * weight(j) * j.hessian_energy * t;
        h2 += j.h * j.h * t;
        if j.h <= beta {
            sublevel += t;
        }
    }
    let t1: f64 = adjoint
        .rho()
        .iter()
        .map(|&(b, r)| eps * weight(&jets[b]) * r)
        .sum::<f64>()
        * adjoint.surface_weight();
    let mass = adjoint.theta_mass();
    let ratio = bounds.upper * eta / bounds.lower;
    let parameters = EstimateParameters {
        mu,
        beta,
        eta,
        epsilon: eps,
        alpha,
        slack,
    };
    let entry = |name: &str, lhs: f64, rhs: f64| EstimateEntry {
        name: name.to_string(),
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + slack),
        parameters,
    };
    Ok(EstimateReport {
        entries: vec![
            entry("hessian-energy", energy, h_sup),
            entry("exponential-weight", t1 + t2 + t3, 2.0 * eps),
            entry(
                "h-squared",
                h2,
                u_sup * u_sup + 2.0 / eta * u_sup * u_sup * h_sup + 4.0 * ratio * ratio * mass,
            ),
            entry(
                "sublevel-mass",
                sublevel,
                constants.exponential / eps * (mu * (beta - alpha) / eps).exp(),
            ),
            entry(
                "total-mass",
                mass,
                constants.exponential / eps * (-mu * alpha / (2.0 * eps)).exp() + constants.mass / (alpha * alpha),
            ),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(x, ln y)`.
pub fn log_slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 || points.iter().any(|p| !(p.1 > 0.0) || !p.0.is_finite()) {
        return Err(Error::Input("slope fit needs ≥ 2 points with positive values".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::AdjointSolver;
    use crate::grid::Grid;
    use crate::hamiltonian::HamiltonianModel;
    use crate::pde_solver::{assemble_linearized, solve_regularized, LinearizationOptions, SolverConfig, SolverProblem};

    fn setup() -> (HamiltonianModel, GridField, AdjointSolution) {
        let model = HamiltonianModel::quadratic(2).unwrap();
        let grid = Grid::cube(2, 1.0, 33).unwrap();
        let g = GridField::from_fn(grid, |x| x[1] + 0.2 * (2.0 * x[0]).sin() * (1.0 - x[1] * x[1])).unwrap();
        let u = solve_regularized(&SolverProblem::new(&model, g, 0.1, SolverConfig::default()).unwrap())
            .unwrap()
            .field;
        let options = LinearizationOptions {
            domain: Some(vec![(-0.5, 0.5), (-0.5, 0.5)]),
            ..LinearizationOptions::default()
        };
        let stencil = assemble_linearized(&u, &model, 0.1, &options).unwrap();
        let center = u.grid().nearest(&[0.0, 0.0]);
        let alpha = node_jets(&u, &model, &[center]).unwrap()[0].h;
        let adj = AdjointSolver::new(&stencil).unwrap().solve(&[0.0, 0.0], alpha).unwrap();
        (model, u, adj)
    }

    #[test]
    fn estimates_hold_on_a_smooth_instance() {
        let (model, u, adj) = setup();
        let mu = 1.0 / 32.0;
        let report = integral_estimates(&adj, &u, &model, mu, 0.5 * adj.alpha(), 0.5, 0.5, EmpiricalConstants::default())
            .unwrap();
        for name in ["hessian-energy", "exponential-weight", "h-squared"] {
            let e = report.entry(name).unwrap();
            assert!(e.pass, "{e:?}");
            assert_eq!(e.parameters.mu, mu);
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        let (model, u, adj) = setup();
        let c = EmpiricalConstants::default();
        let alpha = adj.alpha();
        assert!(matches!(integral_estimates(&adj, &u, &model, 0.1, 0.5 * alpha, 0.5, 0.5, c), Err(Error::Config(_))));
        assert!(matches!(integral_estimates(&adj, &u, &model, 0.03, alpha, 0.5, 0.5, c), Err(Error::Config(_))));
        assert!(matches!(integral_estimates(&adj, &u, &model, 0.03, 0.5 * alpha, 0.0, 0.5, c), Err(Error::Config(_))));
    }

    #[test]
    fn slope_fit_recovers_an_exponential() {
        let pts: Vec<(f64, f64)> = [10.0f64, 20.0, 40.0].iter().map(|&x| (x, 3.0 * (-0.25 * x).exp())).collect();
        let fit = log_slope_fit(&pts).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }
}
