//! Gauss–Legendre rules and the polynomial bump used for mollification.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Discrete one-dimensional mollifier `(1 − (z/γ)²)⁴` on `[-γ, γ]`.
///
/// Returns offsets `z_k` and weights `w_k` with `Σ w_k = 1`, so that
/// `Σ_k w_k f(t − z_k)` approximates the convolution `(η_γ ∗ f)(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpRule {
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BumpRule {
    /// Default order for radius `γ`: `max(8, ⌈4/γ⌉)` points per axis.
    pub fn default_order(gamma: f64) -> usize {
        ((4.0 / gamma).ceil() as usize).max(8)
    }

    pub fn new(gamma: f64, order: usize) -> Self {
        let (nodes, gl) = gauss_legendre(order);
        let mut offsets = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (x, w) in nodes.iter().zip(&gl) {
            let b = 1.0 - x * x;
            offsets.push(gamma * x);
            weights.push(w * b * b * b * b);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { offsets, weights }
    }

    /// Second moment `∫ z² η_γ(z) dz` of the discrete rule.
    pub fn second_moment(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * z * z)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // exact up to degree 11
        for deg in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn bump_second_moment_matches_closed_form() {
        // ∫ z² (1−z²)⁴ / ∫ (1−z²)⁴ on [-1,1] = (256/3465) / (256/315) = 1/11
        let rule = BumpRule::new(1.0, 8);
        assert!((rule.second_moment() - 1.0 / 11.0).abs() < 1e-15);
        let rule = BumpRule::new(0.5, 8);
        assert!((rule.second_moment() - 0.25 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn default_order_scales_with_radius() {
        assert_eq!(BumpRule::default_order(1.0), 8);
        assert_eq!(BumpRule::default_order(0.05), 80);
    }
}
