//! Cone sandwich and barrier-based boundary Lipschitz reports.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::control::{admissible_discount, control_distance_with, BarrierField, BarrierOptions};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::hamiltonian::{cone, ConeSpec, ConvexityBounds, Eval, Hamiltonian};

/// `p ↦ H(−p)`. Its control distance from `x₀`, negated, is a lower barrier
/// at `x₀`.
#[derive(Debug, Clone, Copy)]
pub struct Reflected<'a, H: Hamiltonian + ?Sized> {
    inner: &'a H,
}

impl<'a, H: Hamiltonian + ?Sized> Reflected<'a, H> {
    pub fn new(inner: &'a H) -> Self {
        Self { inner }
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for Reflected<'_, H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn bounds(&self) -> ConvexityBounds {
        self.inner.bounds()
    }

    fn eval(&self, p: &DVector<f64>) -> Result<Eval> {
        let e = self.inner.eval(&(-p))?;
        Ok(Eval {
            value: e.value,
            gradient: -e.gradient,
            hessian: e.hessian,
        })
    }

    fn value(&self, p: &DVector<f64>) -> Result<f64> {
        self.inner.value(&(-p))
    }

    fn is_even(&self) -> bool {
        self.inner.is_even()
    }

    fn conjugate_closed_form(&self, q: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        self.inner
            .conjugate_closed_form(&(-q))
            .map(|(value, argmax)| (value, -argmax))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichSlack {
    /// Relative slack on `ℒ ≤ C^H_σ(y − x₀)`; covers direction-set anisotropy.
    pub cone: f64,
    /// Relative slack on `C^H_σ(y − x₀) ≤ e^{4δℒ/σ} ℒ`.
    pub discounted: f64,
}

impl Default for SandwichSlack {
    fn default() -> Self {
        Self {
            cone: 0.05,
            discounted: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub checked: usize,
    pub negative_nodes: Vec<usize>,
    pub above_cone_nodes: Vec<usize>,
    /// `max ℒ / C^H_σ` over nodes other than the source.
    pub max_cone_ratio: f64,
    /// Nodes where `(δ/σ)ℒ ≥ ln √2`; the discounted inequality is not applied there.
    pub not_applicable: Vec<usize>,
    pub discounted_checked: usize,
    pub discounted_violations: Vec<usize>,
    /// `max C^H_σ / (e^{4δℒ/σ} ℒ)` over applicable nodes.
    pub max_discounted_ratio: f64,
    pub pass: bool,
}

/// Checks `0 ≤ ℒ ≤ C^H_σ(y − x₀)` everywhere and, where `(δ/σ)ℒ < ln √2`,
/// `C^H_σ(y − x₀) ≤ e^{4δℒ/σ} ℒ`. Report-only.
pub fn cone_sandwich_check<H: Hamiltonian + ?Sized>(
    barrier: &BarrierField,
    model: &H,
    slack: SandwichSlack,
) -> Result<SandwichReport> {
    let grid = barrier.grid();
    let n = grid.dim();
    let (sigma, delta) = (barrier.sigma(), barrier.delta());
    let spec = ConeSpec::new(sigma, model)?;
    let x0 = barrier.source();
    let values = barrier.value().values();
    let cones = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            cone(&spec, &DVector::from_iterator(n, (0..n).map(|a| p[a] - x0[a])))
        })
        .collect::<Result<Vec<f64>>>()?;
    let threshold = 2f64.sqrt().ln();
    let mut report = SandwichReport {
        checked: grid.len(),
        negative_nodes: Vec::new(),
        above_cone_nodes: Vec::new(),
        max_cone_ratio: 0.0,
        not_applicable: Vec::new(),
        discounted_checked: 0,
        discounted_violations: Vec::new(),
        max_discounted_ratio: 0.0,
        pass: true,
    };
    for (k, (&v, &c)) in values.iter().zip(&cones).enumerate() {
        if v < 0.0 {
            report.negative_nodes.push(k);
        }
        if k == barrier.source_node() {
            continue;
        }
        report.max_cone_ratio = report.max_cone_ratio.max(v / c);
        if v > c * (1.0 + slack.cone) {
            report.above_cone_nodes.push(k);
        }
        if delta / sigma * v >= threshold {
            report.not_applicable.push(k);
            continue;
        }
        report.discounted_checked += 1;
        let bound = (4.0 * delta * v / sigma).exp() * v;
        report.max_discounted_ratio = report.max_discounted_ratio.max(c / bound);
        if c > bound * (1.0 + slack.discounted) {
            report.discounted_violations.push(k);
        }
    }
    report.pass = report.negative_nodes.is_empty()
        && report.above_cone_nodes.is_empty()
        && report.discounted_violations.is_empty();
    Ok(report)
}

/// Largest axis second difference of the barrier, away from the source and
/// the grid boundary: an empirical one-sided curvature bound.
pub fn semiconcavity_proxy(barrier: &BarrierField, exclusion_cells: usize) -> f64 {
    let grid = barrier.grid();
    let n = grid.dim();
    let v = barrier.value().values();
    let s = grid.multi_index(barrier.source_node());
    let h2 = grid.spacing() * grid.spacing();
    let mut worst = f64::NEG_INFINITY;
    for k in grid.interior() {
        let m = grid.multi_index(k);
        if (0..n).all(|a| m[a].abs_diff(s[a]) <= exclusion_cells) {
            continue;
        }
        for a in 0..n {
            let st = grid.stride(a);
            worst = worst.max((v[k + st] + v[k - st] - 2.0 * v[k]) / h2);
        }
    }
    worst
}

/// `count` boundary nodes spread evenly through the boundary node list.
pub fn sample_boundary_nodes(grid: &Grid, count: usize) -> Vec<usize> {
    let boundary = grid.boundary();
    let count = count.min(boundary.len());
    (0..count)
        .map(|i| boundary[i * boundary.len() / count.max(1)])
        .collect()
}

/// Lipschitz constant of the boundary values of `g` over boundary node pairs.
pub fn boundary_lipschitz(g: &GridField) -> f64 {
    let grid = g.grid();
    let n = grid.dim();
    let nodes = grid.boundary();
    nodes
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let pa = grid.point(a);
            nodes[i + 1..]
                .iter()
                .map(|&b| {
                    let pb = grid.point(b);
                    let dist = (0..n).map(|k| (pa[k] - pb[k]).powi(2)).sum::<f64>().sqrt();
                    (g.values()[a] - g.values()[b]).abs() / dist
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `8Λ·Lip(g)²`, the smallest admissible barrier level.
pub fn minimal_sigma<H: Hamiltonian + ?Sized>(model: &H, g: &GridField) -> f64 {
    let lip = boundary_lipschitz(g);
    8.0 * model.bounds().upper * lip * lip
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichFailure {
    pub source: usize,
    pub node: usize,
    /// `u(x) − g(x₀)`.
    pub difference: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub sigma: f64,
    pub delta: f64,
    pub minimal_sigma: f64,
    pub sources: Vec<usize>,
    pub checked: usize,
    pub failures: Vec<SandwichFailure>,
    /// `max |u(x) − g(x₀)| / |x − x₀|` over sources and nodes.
    pub lipschitz_ratio: f64,
    /// Largest `(u(x) − g(x₀)) / ℒ^δ_σ(x₀, x)`.
    pub upper_tightness: f64,
    /// Largest barrier second difference over the sampled sources.
    pub semiconcavity_proxy: f64,
    pub pass: bool,
}

/// For each source `x₀` checks
/// `−ℒ^δ_σ[Ȟ](x₀, x) ≤ u(x) − g(x₀) ≤ ℒ^δ_σ[H](x₀, x)` at every node, with
/// `Ȟ(p) = H(−p)`. Failures are listed, not raised.
pub fn boundary_lipschitz_check<H: Hamiltonian + ?Sized>(
    u: &GridField,
    g: &GridField,
    model: &H,
    sigma: f64,
    delta: f64,
    sources: &[usize],
    options: &BarrierOptions,
) -> Result<LipschitzReport> {
    let grid = u.grid();
    if !grid.same_shape(g.grid()) {
        return Err(Error::Input("solution and boundary data live on different grids".into()));
    }
    if let Some(&bad) = sources.iter().find(|&&s| s >= grid.len() || !grid.is_boundary(s)) {
        return Err(Error::Input(format!("node {bad} is not a boundary node")));
    }
    let required = minimal_sigma(model, g);
    if sigma < required * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "σ = {sigma} is below 8Λ·Lip(g)² = {required}"
        )));
    }
    if delta > 0.0 {
        let limit = admissible_discount(model, sigma, grid)?;
        if delta >= limit {
            return Err(Error::Config(format!("δ = {delta} is not below δ_σ,U = {limit}")));
        }
    }
    let n = grid.dim();
    let reflected = Reflected::new(model);
    let per_source = sources
        .par_iter()
        .map(|&s| {
            let x0 = grid.point_vec(s);
            let upper = control_distance_with(model, sigma, delta, grid, &x0, options)?;
            let lower = if model.is_even() {
                upper.clone()
            } else {
                control_distance_with(&reflected, sigma, delta, grid, &x0, options)?
            };
            Ok((s, upper, lower))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = LipschitzReport {
        sigma,
        delta,
        minimal_sigma: required,
        sources: sources.to_vec(),
        checked: 0,
        failures: Vec::new(),
        lipschitz_ratio: 0.0,
        upper_tightness: f64::NEG_INFINITY,
        semiconcavity_proxy: f64::NEG_INFINITY,
        pass: true,
    };
    for (s, upper, lower) in &per_source {
        let base = g.values()[*s];
        let p0 = grid.point(*s);
        report.semiconcavity_proxy = report.semiconcavity_proxy.max(semiconcavity_proxy(upper, 2));
        for k in 0..grid.len() {
            let diff = u.values()[k] - base;
            let (lo, hi) = (-lower.value().values()[k], upper.value().values()[k]);
            report.checked += 1;
            if diff > hi + 1e-12 || diff < lo - 1e-12 {
                report.failures.push(SandwichFailure {
                    source: *s,
                    node: k,
                    difference: diff,
                    lower: lo,
                    upper: hi,
                });
            }
            if k != *s {
                let p = grid.point(k);
                let dist = (0..n).map(|a| (p[a] - p0[a]).powi(2)).sum::<f64>().sqrt();
                report.lipschitz_ratio = report.lipschitz_ratio.max(diff.abs() / dist);
                report.upper_tightness = report.upper_tightness.max(diff / hi);
            }
        }
    }
    report.pass = report.failures.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::barriers::control_distance;
    use crate::hamiltonian::{legendre, HamiltonianModel};
    use crate::pde_solver::affine_data;

    #[test]
    fn reflection_flips_gradient_and_conjugate() {
        let m = HamiltonianModel::anisotropic(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let r = Reflected::new(&m);
        let p = DVector::from_vec(vec![0.3, -1.1]);
        let a = m.eval(&p).unwrap();
        let b = r.eval(&(-&p)).unwrap();
        assert!((a.value - b.value).abs() < 1e-14);
        assert!((a.gradient + b.gradient).norm() < 1e-14);
        let q = DVector::from_vec(vec![0.7, 0.2]);
        let lr = legendre(&r, &q).unwrap();
        let lm = legendre(&m, &(-&q)).unwrap();
        assert!((lr.value - lm.value).abs() < 1e-12);
    }

    #[test]
    fn quadratic_sandwich_holds() {
        let grid = Grid::cube(2, 1.0, 31).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let b = control_distance(&q, 2.0, 0.0, &grid, &[0.0, -1.0]).unwrap();
        let r = cone_sandwich_check(&b, &q, SandwichSlack::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.not_applicable.is_empty());
        assert!(r.max_cone_ratio >= 1.0 - 1e-9 && r.max_cone_ratio < 1.05);

        let limit = admissible_discount(&q, 2.0, &grid).unwrap();
        let b = control_distance(&q, 2.0, 0.9 * limit, &grid, &[0.0, -1.0]).unwrap();
        let r = cone_sandwich_check(&b, &q, SandwichSlack::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.discounted_checked + r.not_applicable.len() + 1, grid.len());
    }

    #[test]
    fn large_discount_gates_nodes() {
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let b = control_distance(&q, 1.0, 3.0, &grid, &[-1.0, -1.0]).unwrap();
        let r = cone_sandwich_check(&b, &q, SandwichSlack::default()).unwrap();
        assert!(!r.not_applicable.is_empty());
        assert!(r.negative_nodes.is_empty());
    }

    #[test]
    fn affine_data_lipschitz_ratio() {
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let g = affine_data(grid, &[0.6, 0.8], 0.1).unwrap();
        let sigma = minimal_sigma(&q, &g) * 1.01;
        assert!((sigma / 1.01 - 8.0).abs() < 1e-9);
        let sources = sample_boundary_nodes(&grid, 8);
        assert_eq!(sources.len(), 8);
        let report =
            boundary_lipschitz_check(&g, &g, &q, sigma, 0.0, &sources, &BarrierOptions::default())
                .unwrap();
        assert!(report.pass, "{:?}", report.failures.first());
        assert!((report.lipschitz_ratio - 1.0).abs() < 1e-9);
        assert!(matches!(
            boundary_lipschitz_check(&g, &g, &q, 1.0, 0.0, &sources, &BarrierOptions::default()),
            Err(Error::Config(_))
        ));
    }
}
