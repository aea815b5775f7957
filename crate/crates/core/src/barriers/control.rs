//! Discounted control distances by semi-Lagrangian value iteration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, MAX_DIM};
use crate::hamiltonian::{cone, legendre, ConeSpec, Hamiltonian};

/// Neighbour offsets used by the value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSet {
    /// Offsets with entries in `{−1, 0, 1}`: 2, 8 and 26 directions in 1D, 2D, 3D.
    Compact,
    /// Primitive offsets with entries in `{−2, …, 2}`: 16 directions in 2D
    /// (axes, diagonals, knight moves), 98 in 3D.
    Knight,
}

impl DirectionSet {
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            DirectionSet::Knight
        } else {
            DirectionSet::Compact
        }
    }

    pub fn offsets(self, dim: usize) -> Vec<[i64; MAX_DIM]> {
        let reach: i64 = match self {
            DirectionSet::Compact => 1,
            DirectionSet::Knight => 2,
        };
        let side = (2 * reach + 1) as usize;
        let mut out = Vec::new();
        for k in 0..side.pow(dim as u32) {
            let mut offset = [0i64; MAX_DIM];
            let mut rest = k;
            for o in offset.iter_mut().take(dim) {
                *o = (rest % side) as i64 - reach;
                rest /= side;
            }
            let g = offset.iter().fold(0, |g, &c| gcd(g, c.abs()));
            if g == 1 {
                out.push(offset);
            }
        }
        out
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierOptions {
    /// `None` picks [`DirectionSet::default_for`].
    pub directions: Option<DirectionSet>,
    /// Sweeps stop once the sup-change of a sweep drops below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Travel times tabulated per direction when `δ > 0`.
    pub time_samples: usize,
    /// Reject `δ ≥ δ_{σ,U}` with a config error.
    pub require_admissible: bool,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            directions: None,
            tolerance: 1e-8,
            max_sweeps: 500,
            time_samples: 256,
            require_admissible: false,
        }
    }
}

/// `ℒ^δ_σ(x₀, ·)` on a grid.
#[derive(Debug, Clone)]
pub struct BarrierField {
    source: Vec<f64>,
    source_node: usize,
    sigma: f64,
    delta: f64,
    directions: usize,
    value: GridField,
    sweep_log: Vec<f64>,
}

impl BarrierField {
    pub fn grid(&self) -> &Grid {
        self.value.grid()
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn source_node(&self) -> usize {
        self.source_node
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn direction_count(&self) -> usize {
        self.directions
    }

    pub fn value(&self) -> &GridField {
        &self.value
    }

    /// Sup-change per sweep.
    pub fn sweep_log(&self) -> &[f64] {
        &self.sweep_log
    }
}

fn check_levels(sigma: f64, delta: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("σ must be positive, got {sigma}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("δ must be nonnegative, got {delta}")));
    }
    Ok(())
}

/// `(1 − e^{−δt})/δ`, equal to `t` at `δ = 0`.
fn discount_weight(delta: f64, t: f64) -> f64 {
    if delta == 0.0 {
        t
    } else {
        -(-delta * t).exp_m1() / delta
    }
}

/// Travel-time window `[t_lo, t_hi]` for a segment of length `len` inside a
/// region of diameter `diam`.
fn time_window<H: Hamiltonian + ?Sized>(model: &H, sigma: f64, len: f64, diam: f64) -> (f64, f64) {
    let b = model.bounds();
    let fast = (2.0 * sigma / b.lower).sqrt() * b.upper.max(1.0);
    let slow = (2.0 * sigma / b.upper).sqrt() * b.lower.min(1.0);
    (len / (10.0 * fast), 10.0 * diam.max(len) / slow)
}

/// `L(d/t)`, `+∞` where the transform cannot be evaluated.
fn running_cost<H: Hamiltonian + ?Sized>(model: &H, d: &DVector<f64>, t: f64) -> f64 {
    match legendre(model, &(d / t)) {
        Ok(c) if c.value.is_finite() => c.value,
        _ => f64::INFINITY,
    }
}

/// Minimizes `f` over `t ∈ [lo, hi]`: log-spaced scan, golden section on the
/// bracketing cell, then Newton steps in `ln t` with difference quotients.
fn minimize_time(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const SCAN: usize = 64;
    let (a, b) = (lo.ln(), hi.ln());
    let g = |s: f64| f(s.exp());
    let step = (b - a) / (SCAN - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..SCAN {
        let v = g(a + step * i as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        return f64::INFINITY;
    }
    let mut l = a + step * best.0.saturating_sub(1) as f64;
    let mut r = a + step * (best.0 + 1).min(SCAN - 1) as f64;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = r - phi * (r - l);
    let mut x2 = l + phi * (r - l);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while r - l > 1e-10 {
        if f1 <= f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = g(x1);
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = g(x2);
        }
    }
    let (mut s, mut value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if best.1 < value {
        s = a + step * best.0 as f64;
        value = best.1;
    }
    let e = 1e-4;
    for _ in 0..3 {
        let (fm, fp) = (g(s - e), g(s + e));
        let d1 = (fp - fm) / (2.0 * e);
        let d2 = (fp - 2.0 * value + fm) / (e * e);
        if !(d2 > 0.0) {
            break;
        }
        let trial = (s - d1 / d2).clamp(a, b);
        let ft = g(trial);
        if ft < value {
            s = trial;
            value = ft;
        } else {
            break;
        }
    }
    value
}

/// Cost of the single straight segment from `x` to `y`:
/// `inf_t (σ + L((y−x)/t))·(1 − e^{−δt})/δ`, or `inf_t t·(σ + L((y−x)/t))`
/// at `δ = 0`. An upper bound for `ℒ^δ_σ(x, y)`.
pub fn straight_line_cost<H: Hamiltonian + ?Sized>(
    model: &H,
    sigma: f64,
    delta: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_levels(sigma, delta)?;
    let n = model.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Input(format!("points must have {n} coordinates")));
    }
    let d = DVector::from_iterator(n, y.iter().zip(x).map(|(a, b)| a - b));
    let len = d.norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    Ok(segment_cost(model, sigma, delta, &d, len))
}

fn segment_cost<H: Hamiltonian + ?Sized>(
    model: &H,
    sigma: f64,
    delta: f64,
    d: &DVector<f64>,
    diam: f64,
) -> f64 {
    let (lo, hi) = time_window(model, sigma, d.norm(), diam);
    minimize_time(
        |t| (sigma + running_cost(model, d, t)) * discount_weight(delta, t),
        lo,
        hi,
    )
}

/// Per-direction update rule.
struct Step {
    back: [i64; MAX_DIM],
    /// Undiscounted segment cost.
    fixed: f64,
    /// `(σ + L(d/tᵢ))·(1 − e^{−δtᵢ})/δ` and `e^{−δtᵢ}` on the time table.
    weight: Vec<f64>,
    decay: Vec<f64>,
}

impl Step {
    fn cost(&self, upstream: f64) -> f64 {
        if self.weight.is_empty() {
            return upstream + self.fixed;
        }
        let n = self.weight.len();
        let f = |i: usize| self.weight[i] + self.decay[i] * upstream;
        let mut best = (0, f64::INFINITY);
        for i in 0..n {
            let v = f(i);
            if v < best.1 {
                best = (i, v);
            }
        }
        let (i, mid) = best;
        if i > 0 && i + 1 < n {
            let (left, right) = (f(i - 1), f(i + 1));
            let curvature = left - 2.0 * mid + right;
            if curvature > 0.0 && left.is_finite() && right.is_finite() {
                let shift = 0.5 * (left - right) / curvature;
                return mid - 0.25 * (left - right) * shift;
            }
        }
        mid
    }
}

fn build_steps<H: Hamiltonian + ?Sized>(
    model: &H,
    sigma: f64,
    delta: f64,
    grid: &Grid,
    options: &BarrierOptions,
) -> Vec<Step> {
    let n = grid.dim();
    let h = grid.spacing();
    let diam = grid
        .lower()
        .iter()
        .zip(grid.upper())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    let set = options.directions.unwrap_or(DirectionSet::default_for(n));
    set.offsets(n)
        .into_iter()
        .map(|offset| {
            let d = DVector::from_iterator(n, offset[..n].iter().map(|&c| c as f64 * h));
            let mut back = [0i64; MAX_DIM];
            for a in 0..n {
                back[a] = -offset[a];
            }
            if delta == 0.0 {
                return Step {
                    back,
                    fixed: segment_cost(model, sigma, 0.0, &d, d.norm()),
                    weight: Vec::new(),
                    decay: Vec::new(),
                };
            }
            let (lo, hi) = time_window(model, sigma, d.norm(), diam);
            let m = options.time_samples.max(8);
            let ratio = (hi / lo).ln() / (m - 1) as f64;
            let times: Vec<f64> = (0..m).map(|i| lo * (ratio * i as f64).exp()).collect();
            Step {
                back,
                fixed: 0.0,
                weight: times
                    .iter()
                    .map(|&t| (sigma + running_cost(model, &d, t)) * discount_weight(delta, t))
                    .collect(),
                decay: times.iter().map(|&t| (-delta * t).exp()).collect(),
            }
        })
        .collect()
}

/// `δ_{σ,U} = σ / (2 sup C^H_σ(y − x))` over node pairs of the grid; the
/// supremum of a convex function over box differences sits at the vertices.
pub fn admissible_discount<H: Hamiltonian + ?Sized>(model: &H, sigma: f64, grid: &Grid) -> Result<f64> {
    let spec = ConeSpec::new(sigma, model)?;
    let n = grid.dim();
    let mut sup = 0.0f64;
    for signs in 0..(1usize << n) {
        let x = DVector::from_iterator(
            n,
            (0..n).map(|a| {
                let w = grid.upper()[a] - grid.lower()[a];
                if signs >> a & 1 == 1 {
                    -w
                } else {
                    w
                }
            }),
        );
        sup = sup.max(cone(&spec, &x)?);
    }
    Ok(sigma / (2.0 * sup))
}

/// Half of the largest discount for which `(δ/σ)ℒ^δ_σ < ln √2` holds on the
/// whole grid, namely `½·ln 2·δ_{σ,U}` (this is also below `δ_{σ,U}`).
pub fn default_discount<H: Hamiltonian + ?Sized>(model: &H, sigma: f64, grid: &Grid) -> Result<f64> {
    Ok(0.5 * 2f64.ln() * admissible_discount(model, sigma, grid)?)
}

/// Node orderings for alternating Gauss–Seidel sweeps, one per axis-reversal
/// pattern.
fn sweep_orders(grid: &Grid) -> Vec<Vec<usize>> {
    let n = grid.dim();
    (0..(1usize << n))
        .map(|pattern| {
            (0..grid.len())
                .map(|k| {
                    let m = grid.multi_index(k);
                    (0..n)
                        .map(|a| {
                            let i = if pattern >> a & 1 == 1 {
                                grid.counts()[a] - 1 - m[a]
                            } else {
                                m[a]
                            };
                            i * grid.stride(a)
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn control_distance<H: Hamiltonian + ?Sized>(
    model: &H,
    sigma: f64,
    delta: f64,
    grid: &Grid,
    source: &[f64],
) -> Result<BarrierField> {
    control_distance_with(model, sigma, delta, grid, source, &BarrierOptions::default())
}

/// `ℒ^δ_σ(x₀, ·)` by value iteration over the direction set: each update
/// minimizes `(σ + L(d/t))·(1 − e^{−δt})/δ + e^{−δt}·V(x − d)` over the
/// direction `d` and the travel time `t`.
pub fn control_distance_with<H: Hamiltonian + ?Sized>(
    model: &H,
    sigma: f64,
    delta: f64,
    grid: &Grid,
    source: &[f64],
    options: &BarrierOptions,
) -> Result<BarrierField> {
    check_levels(sigma, delta)?;
    let n = grid.dim();
    if model.dim() != n || source.len() != n {
        return Err(Error::Input(format!(
            "model, grid and source dimensions differ: {}, {n}, {}",
            model.dim(),
            source.len()
        )));
    }
    if options.require_admissible && delta > 0.0 {
        let limit = admissible_discount(model, sigma, grid)?;
        if delta >= limit {
            return Err(Error::Config(format!("δ = {delta} is not below δ_σ,U = {limit}")));
        }
    }
    let source_node = grid.nearest(source);
    let p = grid.point(source_node);
    let miss = (0..n).map(|a| (p[a] - source[a]).abs()).fold(0.0, f64::max);
    if miss > 1e-9 * grid.spacing() {
        return Err(Error::Input(format!("source {source:?} is not a grid node")));
    }

    let steps = build_steps(model, sigma, delta, grid, options);
    let orders = sweep_orders(grid);
    let mut values = vec![f64::INFINITY; grid.len()];
    values[source_node] = 0.0;
    let mut log = Vec::new();
    for sweep in 0..options.max_sweeps {
        let mut change = 0.0f64;
        for &node in &orders[sweep % orders.len()] {
            if node == source_node {
                continue;
            }
            let mut best = f64::INFINITY;
            for step in &steps {
                if let Some(y) = grid.shifted(node, &step.back[..n]) {
                    let upstream = values[y];
                    if upstream.is_finite() {
                        best = best.min(step.cost(upstream));
                    }
                }
            }
            let old = values[node];
            if best < old {
                change = change.max(if old.is_finite() { old - best } else { best });
                values[node] = best;
            }
        }
        log.push(change);
        if change < options.tolerance && values.iter().all(|v| v.is_finite()) {
            return Ok(BarrierField {
                source: p[..n].to_vec(),
                source_node,
                sigma,
                delta,
                directions: steps.len(),
                value: GridField::new(*grid, values)?.with_label("barrier"),
                sweep_log: log,
            });
        }
    }
    Err(Error::numerical(
        format!("value iteration did not settle in {} sweeps", options.max_sweeps),
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianModel;
    use nalgebra::DMatrix;

    #[test]
    fn direction_counts() {
        assert_eq!(DirectionSet::Compact.offsets(1).len(), 2);
        assert_eq!(DirectionSet::Compact.offsets(2).len(), 8);
        assert_eq!(DirectionSet::Knight.offsets(2).len(), 16);
        assert_eq!(DirectionSet::Compact.offsets(3).len(), 26);
    }

    #[test]
    fn straight_line_closed_forms() {
        let q = HamiltonianModel::quadratic(2).unwrap();
        let c = straight_line_cost(&q, 2.0, 0.0, &[0.1, -0.2], &[0.7, 0.4]).unwrap();
        let len = (0.36f64 + 0.36).sqrt();
        assert!((c - 2.0 * len).abs() < 1e-10, "{c}");
        assert_eq!(straight_line_cost(&q, 2.0, 0.3, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let model = HamiltonianModel::anisotropic(a.clone()).unwrap();
        let d = DVector::from_vec(vec![0.3, -0.8]);
        let inv = a.try_inverse().unwrap();
        let expected = (2.0f64 * 1.5).sqrt() * d.dot(&(&inv * &d)).sqrt();
        let c = straight_line_cost(&model, 1.5, 0.0, &[0.0, 0.0], &[0.3, -0.8]).unwrap();
        assert!((c - expected).abs() < 1e-10, "{c} vs {expected}");

        let discounted = straight_line_cost(&model, 1.5, 0.4, &[0.0, 0.0], &[0.3, -0.8]).unwrap();
        assert!(discounted < c && discounted > 0.0);
    }

    #[test]
    fn quadratic_barrier_matches_cone() {
        let grid = Grid::cube(2, 1.0, 41).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let b = control_distance(&q, 2.0, 0.0, &grid, &[0.0, 0.0]).unwrap();
        assert_eq!(b.direction_count(), 16);
        assert_eq!(b.value().values()[b.source_node()], 0.0);
        for k in 0..grid.len() {
            let p = grid.point(k);
            let exact = 2.0 * (p[0] * p[0] + p[1] * p[1]).sqrt();
            let v = b.value().values()[k];
            assert!(v >= exact - 1e-9 && v <= exact * 1.05 + 1e-12, "{v} vs {exact}");
        }
    }

    #[test]
    fn discount_lowers_value() {
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let plain = control_distance(&q, 1.0, 0.0, &grid, &[-1.0, 0.0]).unwrap();
        let disc = control_distance(&q, 1.0, 0.5, &grid, &[-1.0, 0.0]).unwrap();
        for (a, b) in disc.value().values().iter().zip(plain.value().values()) {
            assert!(*a <= b * (1.0 + 1e-6) + 1e-12, "{a} > {b}");
        }
        assert!(disc.value().values().iter().zip(plain.value().values()).any(|(a, b)| a < &(b - 1e-3)));
    }

    #[test]
    fn inadmissible_discount_rejected() {
        let grid = Grid::cube(2, 1.0, 11).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let limit = admissible_discount(&q, 2.0, &grid).unwrap();
        let expected = 2.0 / (2.0 * 2.0 * 8f64.sqrt());
        assert!((limit - expected).abs() < 1e-9);
        let options = BarrierOptions {
            require_admissible: true,
            ..BarrierOptions::default()
        };
        let err = control_distance_with(&q, 2.0, limit * 1.01, &grid, &[0.0, 0.0], &options);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(control_distance_with(&q, 2.0, limit * 0.5, &grid, &[0.0, 0.0], &options).is_ok());
        assert!(matches!(
            control_distance(&q, 2.0, 0.0, &grid, &[0.05, 0.0]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn non_convergence_reports_log() {
        let grid = Grid::cube(2, 1.0, 11).unwrap();
        let q = HamiltonianModel::quadratic(2).unwrap();
        let options = BarrierOptions {
            max_sweeps: 1,
            ..BarrierOptions::default()
        };
        match control_distance_with(&q, 1.0, 0.0, &grid, &[0.0, 0.0], &options) {
            Err(Error::Numerical { history, .. }) => assert_eq!(history.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
