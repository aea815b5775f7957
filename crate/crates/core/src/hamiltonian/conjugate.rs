use nalgebra::DVector;

use super::mollify::{minimize_strongly_convex, MAX_ITERATIONS, TOLERANCE};
use super::{check_point, Eval, Hamiltonian};
use crate::error::{Error, Result};

/// `L(q) = sup_p {p·q − H(p)}` and the maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: DVector<f64>,
}

/// Legendre transform; closed form for the quadratic families, Newton otherwise.
pub fn legendre<H: Hamiltonian + ?Sized>(model: &H, q: &DVector<f64>) -> Result<Conjugate> {
    check_point(q, model.dim())?;
    if let Some((value, argmax)) = model.conjugate_closed_form(q) {
        return Ok(Conjugate { value, argmax });
    }
    legendre_newton(model, q, &(q / model.bounds().upper))
}

/// Legendre transform by damped Newton on the strongly concave objective,
/// started at `start`.
pub fn legendre_newton<H: Hamiltonian + ?Sized>(
    model: &H,
    q: &DVector<f64>,
    start: &DVector<f64>,
) -> Result<Conjugate> {
    check_point(q, model.dim())?;
    let argmax = minimize_strongly_convex(
        |p| {
            let e = model.eval(p)?;
            Ok(Eval {
                value: e.value - p.dot(q),
                gradient: e.gradient - q,
                hessian: e.hessian,
            })
        },
        start,
    )
    .map_err(|e| match e {
        Error::Numerical { history, .. } => {
            Error::numerical(format!("Legendre Newton diverged at q = {:?}", q.as_slice()), history)
        }
        other => other,
    })?;
    let value = argmax.dot(q) - model.value(&argmax)?;
    Ok(Conjugate { value, argmax })
}

/// A level `σ > 0` paired with a model: the generalized cone
/// `C^H_σ(x) = max_{H(p) = σ} p·x`.
#[derive(Debug)]
pub struct ConeSpec<'a, H: Hamiltonian + ?Sized> {
    sigma: f64,
    model: &'a H,
}

impl<H: Hamiltonian + ?Sized> Clone for ConeSpec<'_, H> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<H: Hamiltonian + ?Sized> Copy for ConeSpec<'_, H> {}

impl<'a, H: Hamiltonian + ?Sized> ConeSpec<'a, H> {
    pub fn new(sigma: f64, model: &'a H) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("cone level must be positive, got {sigma}")));
        }
        Ok(Self { sigma, model })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn model(&self) -> &'a H {
        self.model
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        cone(self, x)
    }
}

/// Evaluates `C^H_σ(x)`.
///
/// At the maximizer `∇H(p) = s·x` for a Lagrange multiplier `1/s > 0`, so `p`
/// is the Legendre argmax at `q = s·x` and `s ↦ H(p(s x))` is increasing.
/// Strong convexity brackets `s` in `[λ√(2σ/Λ), Λ√(2σ/λ)] / |x|`; the root of
/// `H(p(s x)) = σ` is found by safeguarded Newton on `s`.
pub fn cone<H: Hamiltonian + ?Sized>(spec: &ConeSpec<'_, H>, x: &DVector<f64>) -> Result<f64> {
    let model = spec.model;
    check_point(x, model.dim())?;
    let norm = x.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let sigma = spec.sigma;
    let b = model.bounds();
    let mut lo = 0.5 * b.lower * (2.0 * sigma / b.upper).sqrt() / norm;
    let mut hi = 2.0 * b.upper * (2.0 * sigma / b.lower).sqrt() / norm;
    let mut s = (lo * hi).sqrt();
    let mut start = x * (s / b.upper);
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let q = x * s;
        let conj = if let Some((value, argmax)) = model.conjugate_closed_form(&q) {
            Conjugate { value, argmax }
        } else {
            legendre_newton(model, &q, &start)?
        };
        let e = model.eval(&conj.argmax)?;
        let g = e.value - sigma;
        history.push(g);
        if g.abs() <= TOLERANCE * sigma || (hi - lo) <= 1e-15 * hi {
            return Ok(conj.argmax.dot(x));
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        // d/ds H(p(s x)) = s · xᵀ (D²H)⁻¹ x
        let dgds = e
            .hessian
            .clone()
            .cholesky()
            .map(|c| s * x.dot(&c.solve(x)))
            .unwrap_or(0.0);
        let newton = s - g / dgds;
        s = if dgds > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        start = conj.argmax;
    }
    Err(Error::numerical("cone level-set solve did not converge", history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianModel;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn quadratic_is_self_dual() {
        let m = HamiltonianModel::quadratic(2).unwrap();
        let c = legendre(&m, &v(&[3.0, 4.0])).unwrap();
        assert_eq!(c.value, 12.5);
        assert_eq!(c.argmax, v(&[3.0, 4.0]));
        let c = legendre_newton(&m, &v(&[3.0, 4.0]), &v(&[0.0, 0.0])).unwrap();
        assert!((c.value - 12.5).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_conjugate_uses_inverse_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = a.clone().try_inverse().unwrap();
        let m = HamiltonianModel::anisotropic(a).unwrap();
        let q = v(&[1.0, -2.0]);
        let expected = 0.5 * (&inv * &q).dot(&q);
        let closed = legendre(&m, &q).unwrap();
        let newton = legendre_newton(&m, &q, &(&q / 0.5)).unwrap();
        assert!((closed.value - expected).abs() < 1e-14);
        assert!((newton.value - expected).abs() < 1e-12);
        assert!((newton.argmax - &inv * &q).amax() < 1e-12);
    }

    #[test]
    fn zero_slope_has_zero_conjugate() {
        let m = HamiltonianModel::separable_power(3, 1.5, 0.3, 1.0).unwrap();
        let c = legendre(&m, &DVector::zeros(3)).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.argmax, DVector::zeros(3));
    }

    #[test]
    fn duality_gap_is_tiny_for_power_family() {
        let m = HamiltonianModel::separable_power(2, 4.0, 1.0, 13.0).unwrap();
        let q = v(&[2.0, -0.5]);
        let c = legendre(&m, &q).unwrap();
        let h = m.value(&c.argmax).unwrap();
        assert!((q.dot(&c.argmax) - h - c.value).abs() < 1e-10);
        let g = m.eval(&c.argmax).unwrap().gradient;
        assert!((g - q).amax() < 1e-11);
    }

    #[test]
    fn cone_examples() {
        let m = HamiltonianModel::quadratic(2).unwrap();
        let spec = ConeSpec::new(2.0, &m).unwrap();
        assert!((spec.eval(&v(&[1.0, 0.0])).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(spec.eval(&v(&[0.0, 0.0])).unwrap(), 0.0);

        let a = HamiltonianModel::anisotropic(DMatrix::from_diagonal(&v(&[1.0, 4.0]))).unwrap();
        let spec = ConeSpec::new(0.5, &a).unwrap();
        assert!((spec.eval(&v(&[0.0, 1.0])).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cone_level_must_be_positive() {
        let m = HamiltonianModel::quadratic(2).unwrap();
        assert!(ConeSpec::new(0.0, &m).is_err());
        assert!(ConeSpec::new(-1.0, &m).is_err());
    }
}
