use nalgebra::{DMatrix, DVector};

use super::quadrature::BumpRule;
use super::{
    check_point, separable_eval, ConvexityBounds, Eval, Hamiltonian, HamiltonianModel, ProfileJet,
};
use crate::error::{Error, Result};

/// Inner solves stop at this gradient norm or after [`MAX_ITERATIONS`].
pub(crate) const TOLERANCE: f64 = 1e-12;
pub(crate) const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
enum Convolved {
    /// Convolving a quadratic form with an even kernel only adds a constant,
    /// which the renormalization removes again.
    QuadraticForm { added_constant: f64 },
    /// Tensor-product kernel against a separable function: one 1D rule per axis.
    Separable { rule: BumpRule },
}

/// `H^γ(p) = (η_γ ∗ H)(p + p^γ) − (η_γ ∗ H)(p^γ)` where `p^γ` minimizes the
/// convolution, so that `H^γ(0) = min H^γ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedModel {
    base: HamiltonianModel,
    gamma: f64,
    order: usize,
    shift: DVector<f64>,
    min_offset: f64,
    convolved: Convolved,
}

/// Mollifies `model` with the bump `(1 − (z/γ)²)⁴` (tensor product over axes).
pub fn mollify(model: &HamiltonianModel, gamma: f64) -> Result<MollifiedModel> {
    MollifiedModel::new(model, gamma, BumpRule::default_order(gamma))
}

impl MollifiedModel {
    pub fn new(model: &HamiltonianModel, gamma: f64, order: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!(
                "mollification radius must lie in (0, 1], got {gamma}"
            )));
        }
        let n = model.dim();
        let rule = BumpRule::new(gamma, order.max(2));
        if let Some(matrix) = model.quadratic_matrix() {
            let added_constant = 0.5 * matrix.trace() * rule.second_moment();
            return Ok(Self {
                base: model.clone(),
                gamma,
                order,
                shift: DVector::zeros(n),
                min_offset: added_constant,
                convolved: Convolved::QuadraticForm { added_constant },
            });
        }
        let mut out = Self {
            base: model.clone(),
            gamma,
            order,
            shift: DVector::zeros(n),
            min_offset: 0.0,
            convolved: Convolved::Separable { rule },
        };
        let start = DVector::zeros(n);
        let shift = minimize_strongly_convex(|p| out.convolved_eval(p), &start)?;
        out.min_offset = out.convolved_eval(&shift)?.value;
        out.shift = shift;
        Ok(out)
    }

    pub fn base(&self) -> &HamiltonianModel {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn quadrature_order(&self) -> usize {
        self.order
    }

    /// The argmin `p^γ` of the unnormalized convolution.
    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    /// `min (η_γ ∗ H)`, subtracted so that `H^γ(0) = 0`.
    pub fn min_offset(&self) -> f64 {
        self.min_offset
    }

    /// `(η_γ ∗ H)(p)` before shifting and renormalizing.
    pub fn convolved_eval(&self, p: &DVector<f64>) -> Result<Eval> {
        match &self.convolved {
            Convolved::QuadraticForm { added_constant } => {
                let mut e = self.base.eval(p)?;
                e.value += added_constant;
                Ok(e)
            }
            Convolved::Separable { rule } => separable_eval(p, |t| {
                let mut acc = ProfileJet {
                    value: 0.0,
                    slope: 0.0,
                    curvature: 0.0,
                };
                for (z, w) in rule.offsets.iter().zip(&rule.weights) {
                    let j = self
                        .base
                        .profile_jet(t - z)
                        .expect("separable family")?;
                    acc.value += w * j.value;
                    acc.slope += w * j.slope;
                    acc.curvature += w * j.curvature;
                }
                Ok(acc)
            }),
        }
    }
}

impl Hamiltonian for MollifiedModel {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn bounds(&self) -> ConvexityBounds {
        self.base.bounds()
    }

    fn eval(&self, p: &DVector<f64>) -> Result<Eval> {
        check_point(p, self.dim())?;
        match self.convolved {
            Convolved::QuadraticForm { .. } => self.base.eval(p),
            Convolved::Separable { .. } => {
                let mut e = self.convolved_eval(&(p + &self.shift))?;
                e.value -= self.min_offset;
                Ok(e)
            }
        }
    }

    fn is_even(&self) -> bool {
        self.base.is_even() && self.shift.iter().all(|s| *s == 0.0)
    }

    fn conjugate_closed_form(&self, q: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        match self.convolved {
            Convolved::QuadraticForm { .. } => self.base.conjugate_closed_form(q),
            Convolved::Separable { .. } => None,
        }
    }
}

/// Damped Newton for a strongly convex function given by its evaluator.
///
/// Stops when `|∇f| ≤ 1e-12·max(1, |∇f(x₀)|)`; fails with the gradient-norm log
/// after 100 iterations.
pub fn minimize_strongly_convex(
    f: impl Fn(&DVector<f64>) -> Result<Eval>,
    start: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut x = start.clone();
    let mut e = f(&x)?;
    let scale = e.gradient.norm().max(1.0);
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let gnorm = e.gradient.norm();
        history.push(gnorm);
        if gnorm <= TOLERANCE * scale {
            return Ok(x);
        }
        let step = newton_step(&e.hessian, &e.gradient)?;
        let slope = -e.gradient.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = &x - &step * t;
            let te = match f(&trial) {
                Ok(te) => te,
                Err(Error::Domain(_)) if t >= 1e-10 => {
                    t *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            // Near the minimizer the predicted decrease drops below the
            // round-off of the objective; a full step that halves the
            // gradient is then accepted on its own.
            let contracts = t == 1.0 && te.gradient.norm() <= 0.5 * gnorm;
            if te.value <= e.value + 1e-4 * t * slope || contracts || t < 1e-10 {
                x = trial;
                e = te;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::numerical(
        "strongly convex minimization did not converge",
        history,
    ))
}

/// Solves `hessian · step = rhs` for a symmetric positive definite Hessian.
pub(crate) fn newton_step(hessian: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    hessian
        .clone()
        .cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::numerical("Hessian is not positive definite", vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::quadrature::gauss_legendre;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    /// Independent 2D tensor quadrature of `H(p − z) η_γ(z)`.
    fn brute_convolution(model: &HamiltonianModel, gamma: f64, p: &DVector<f64>) -> f64 {
        let (x, w) = gauss_legendre(40);
        let kernel: Vec<f64> = x
            .iter()
            .zip(&w)
            .map(|(x, w)| w * (1.0 - x * x).powi(4))
            .collect();
        let total: f64 = kernel.iter().sum();
        let mut acc = 0.0;
        for (i, xi) in x.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                let z = v(&[gamma * xi, gamma * xj]);
                acc += kernel[i] * kernel[j] * model.value(&(p - z)).unwrap();
            }
        }
        acc / (total * total)
    }

    #[test]
    fn quadratic_mollification_is_identity_after_renormalization() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let model = HamiltonianModel::anisotropic(a).unwrap();
        for gamma in [1.0, 0.3, 0.05] {
            let m = mollify(&model, gamma).unwrap();
            assert_eq!(m.shift(), &DVector::zeros(2));
            for p in [v(&[0.0, 0.0]), v(&[1.5, -2.0]), v(&[-2.0, 2.0])] {
                let brute = brute_convolution(&model, gamma, &p) - brute_convolution(&model, gamma, &DVector::zeros(2));
                assert!((m.value(&p).unwrap() - brute).abs() < 1e-12);
                assert!((m.value(&p).unwrap() - model.value(&p).unwrap()).abs() < 1e-12);
            }
            let c = brute_convolution(&model, gamma, &DVector::zeros(2));
            assert!((m.min_offset() - c).abs() < 1e-13);
        }
    }

    #[test]
    fn even_base_has_zero_shift() {
        let model = HamiltonianModel::separable_power(2, 4.0, 1.0, 13.0).unwrap();
        let m = mollify(&model, 0.2).unwrap();
        assert_eq!(m.shift(), &DVector::zeros(2));
        assert_eq!(m.value(&DVector::zeros(2)).unwrap(), 0.0);
        assert!(m.is_even());
    }

    #[test]
    fn separable_convolution_matches_tensor_quadrature() {
        let model = HamiltonianModel::separable_power(2, 3.0, 1.0, 7.0).unwrap();
        let m = mollify(&model, 0.5).unwrap();
        let p = v(&[0.7, -1.2]);
        let brute = brute_convolution(&model, 0.5, &p);
        let got = m.convolved_eval(&p).unwrap().value;
        assert!((got - brute).abs() < 1e-8, "{got} vs {brute}");
    }

    #[test]
    fn asymmetric_table_gets_nonzero_shift_and_zero_minimum() {
        // φ(t) = t²/2 + t³/10 sampled; asymmetric, minimum still at 0
        let table = crate::hamiltonian::TabulatedProfile::sample(3.0, 121, |t| 0.5 * t * t + 0.1 * t * t * t)
            .unwrap();
        let model = HamiltonianModel::tabulated(1, table, 0.4, 1.6).unwrap();
        let m = mollify(&model, 0.5).unwrap();
        assert!(m.shift()[0].abs() > 1e-4);
        let e0 = m.eval(&DVector::zeros(1)).unwrap();
        assert!(e0.value.abs() < 1e-15);
        assert!(e0.gradient[0].abs() < 1e-11);
        for t in [-1.0, -0.3, 0.4, 1.2] {
            assert!(m.value(&v(&[t])).unwrap() > 0.0);
        }
    }

    #[test]
    fn radius_out_of_range_rejected() {
        let model = HamiltonianModel::quadratic(1).unwrap();
        assert!(matches!(mollify(&model, 0.0), Err(Error::Config(_))));
        assert!(matches!(mollify(&model, 1.5), Err(Error::Config(_))));
    }
}
