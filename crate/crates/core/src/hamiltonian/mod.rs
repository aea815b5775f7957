//! Hamiltonians `H: ℝⁿ → ℝ` with `λ|ξ|² ≤ ⟨D²H(p)ξ, ξ⟩ ≤ Λ|ξ|²` and
//! `H(0) = min H = 0`, together with the convex-analytic objects built from them.

mod check;
mod conjugate;
mod mollify;
pub mod profile;
pub mod quadrature;

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use check::{check_h1_h2, ConvexityReport};
pub use conjugate::{cone, legendre, ConeSpec, Conjugate};
pub use mollify::{minimize_strongly_convex, mollify, MollifiedModel};
pub use profile::{PowerProfile, ProfileJet, TabulatedProfile};

/// Value, gradient and Hessian of a Hamiltonian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Eval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Convexity constants `0 < λ ≤ Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ConvexityBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::Config(format!(
                "convexity constants must satisfy 0 < λ ≤ Λ < ∞, got λ = {lower}, Λ = {upper}"
            )));
        }
        Ok(Self { lower, upper })
    }
}

/// Anything that can be evaluated like a Hamiltonian.
///
/// Implementations are immutable and shareable across threads.
pub trait Hamiltonian: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn bounds(&self) -> ConvexityBounds;

    fn eval(&self, p: &DVector<f64>) -> Result<Eval>;

    fn value(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.eval(p)?.value)
    }

    /// `H(−p) = H(p)` for all `p`.
    fn is_even(&self) -> bool {
        false
    }

    /// Closed-form Legendre transform `(L(q), argmax)` when the family has one.
    fn conjugate_closed_form(&self, _q: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        None
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bounds(&self) -> ConvexityBounds {
        (**self).bounds()
    }
    fn eval(&self, p: &DVector<f64>) -> Result<Eval> {
        (**self).eval(p)
    }
    fn value(&self, p: &DVector<f64>) -> Result<f64> {
        (**self).value(p)
    }
    fn is_even(&self) -> bool {
        (**self).is_even()
    }
    fn conjugate_closed_form(&self, q: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        (**self).conjugate_closed_form(q)
    }
}

/// The built-in model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `½|p|²`.
    Quadratic,
    /// `½⟨Ap, p⟩` with `A` symmetric positive definite.
    Anisotropic {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
    /// `Σᵢ ((1 + pᵢ²)^{α/2} − 1)/α`.
    SeparablePower(PowerProfile),
    /// `Σᵢ φ(pᵢ)` with `φ` a natural cubic spline through user samples.
    Tabulated(TabulatedProfile),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::Anisotropic { .. } => "anisotropic-quadratic",
            Family::SeparablePower(_) => "separable-power",
            Family::Tabulated(_) => "tabulated",
        }
    }
}

/// A Hamiltonian from one of the built-in families, with its stated `λ, Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    family: Family,
    bounds: ConvexityBounds,
    dim: usize,
}

impl HamiltonianModel {
    /// `½|p|²` in dimension `n` (`λ = Λ = 1`).
    pub fn quadratic(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            family: Family::Quadratic,
            bounds: ConvexityBounds::new(1.0, 1.0)?,
            dim,
        })
    }

    /// `½⟨Ap, p⟩`; `λ, Λ` are the extreme eigenvalues of `A`.
    pub fn anisotropic(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        check_dim(dim)?;
        if matrix.ncols() != dim {
            return Err(Error::Config("anisotropic matrix must be square".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("anisotropic matrix must be finite".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::Config("anisotropic matrix must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
        let bounds = ConvexityBounds::new(eig.min(), eig.max())?;
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Config("anisotropic matrix is singular".into()))?;
        Ok(Self {
            family: Family::Anisotropic { matrix, inverse },
            bounds,
            dim,
        })
    }

    /// Separable power family with user-stated constants (valid on the working box).
    pub fn separable_power(dim: usize, alpha: f64, lower: f64, upper: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            family: Family::SeparablePower(PowerProfile::new(alpha)?),
            bounds: ConvexityBounds::new(lower, upper)?,
            dim,
        })
    }

    /// Separable power family with `λ, Λ` set to the exact curvature range on `[-r, r]ⁿ`.
    pub fn separable_power_on_box(dim: usize, alpha: f64, half_width: f64) -> Result<Self> {
        let profile = PowerProfile::new(alpha)?;
        let (lo, hi) = profile.curvature_range(-half_width, half_width);
        Self::separable_power(dim, alpha, lo, hi)
    }

    pub fn tabulated(dim: usize, profile: TabulatedProfile, lower: f64, upper: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            family: Family::Tabulated(profile),
            bounds: ConvexityBounds::new(lower, upper)?,
            dim,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Returns the model with different stated constants (same function).
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        self.bounds = ConvexityBounds::new(lower, upper)?;
        Ok(self)
    }

    /// The quadratic form matrix for the two quadratic families.
    pub(crate) fn quadratic_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.family {
            Family::Quadratic => Some(DMatrix::identity(self.dim, self.dim)),
            Family::Anisotropic { matrix, .. } => Some(matrix.clone()),
            _ => None,
        }
    }

    /// Per-axis profile jet for the separable families.
    pub(crate) fn profile_jet(&self, t: f64) -> Option<Result<ProfileJet>> {
        match &self.family {
            Family::SeparablePower(p) => Some(Ok(p.jet(t))),
            Family::Tabulated(p) => Some(p.jet(t)),
            _ => None,
        }
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn check_point(p: &DVector<f64>, dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(Error::Input(format!(
            "point has length {}, model dimension is {dim}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite point {:?}", p.as_slice())));
    }
    Ok(())
}

/// Assembles a separable evaluation from per-axis jets.
pub(crate) fn separable_eval(
    p: &DVector<f64>,
    mut jet: impl FnMut(f64) -> Result<ProfileJet>,
) -> Result<Eval> {
    let n = p.len();
    let mut value = 0.0;
    let mut gradient = DVector::zeros(n);
    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        let j = jet(p[i])?;
        value += j.value;
        gradient[i] = j.slope;
        hessian[(i, i)] = j.curvature;
    }
    Ok(Eval {
        value,
        gradient,
        hessian,
    })
}

impl Hamiltonian for HamiltonianModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> ConvexityBounds {
        self.bounds
    }

    fn eval(&self, p: &DVector<f64>) -> Result<Eval> {
        check_point(p, self.dim)?;
        match &self.family {
            Family::Quadratic => Ok(Eval {
                value: 0.5 * p.norm_squared(),
                gradient: p.clone(),
                hessian: DMatrix::identity(self.dim, self.dim),
            }),
            Family::Anisotropic { matrix, .. } => {
                let ap = matrix * p;
                Ok(Eval {
                    value: 0.5 * ap.dot(p),
                    gradient: ap,
                    hessian: matrix.clone(),
                })
            }
            Family::SeparablePower(profile) => separable_eval(p, |t| Ok(profile.jet(t))),
            Family::Tabulated(profile) => separable_eval(p, |t| profile.jet(t)),
        }
    }

    fn is_even(&self) -> bool {
        match &self.family {
            Family::Tabulated(t) => {
                let v = t.values();
                let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
                (t.start() + t.range().1).abs() < 1e-12
                    && v.iter().zip(v.iter().rev()).all(|(a, b)| (a - b).abs() <= 1e-12 * scale)
            }
            _ => true,
        }
    }

    fn conjugate_closed_form(&self, q: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        match &self.family {
            Family::Quadratic => Some((0.5 * q.norm_squared(), q.clone())),
            Family::Anisotropic { inverse, .. } => {
                let p = inverse * q;
                Some((0.5 * p.dot(q), p))
            }
            _ => None,
        }
    }
}

/// Central finite-difference gradient and Hessian of `value`, for checking
/// the analytic derivatives.
pub fn finite_difference_derivatives(
    model: &dyn Hamiltonian,
    p: &DVector<f64>,
    step: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = p.len();
    let mut gradient = DVector::zeros(n);
    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[i] += step;
        minus[i] -= step;
        gradient[i] = (model.value(&plus)? - model.value(&minus)?) / (2.0 * step);
        let gp = model.eval(&plus)?.gradient;
        let gm = model.eval(&minus)?.gradient;
        for j in 0..n {
            hessian[(j, i)] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    Ok((gradient, hessian))
}
