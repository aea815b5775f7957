use nalgebra::{DVector, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Hamiltonian;
use crate::error::{Error, Result};

const SAMPLE_SEED: u64 = 0x5eed_4831;

/// Sampled verification of `λ ≤ eig D²H ≤ Λ` and `H(0) = min H = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub value_at_origin: f64,
    pub min_value: f64,
    /// `min_p H(p) − (λ/2)|p|²` over the samples.
    pub min_quadratic_margin: f64,
    pub eigenvalue_violations: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Samples `count` points uniformly in `bounds` (plus the origin) with a fixed seed.
pub fn check_h1_h2<H: Hamiltonian + ?Sized>(
    model: &H,
    bounds: &[(f64, f64)],
    count: usize,
    tolerance: f64,
) -> Result<ConvexityReport> {
    let n = model.dim();
    if bounds.len() != n {
        return Err(Error::Input(format!(
            "sampling box has {} axes, model dimension is {n}",
            bounds.len()
        )));
    }
    if bounds.iter().any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
        return Err(Error::Input("sampling box must be bounded".into()));
    }
    let b = model.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let origin = model.eval(&DVector::zeros(n))?;
    let mut report = ConvexityReport {
        samples: count,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        value_at_origin: origin.value,
        min_value: origin.value,
        min_quadratic_margin: origin.value,
        eigenvalue_violations: 0,
        tolerance,
        pass: true,
    };
    let record = |p: &DVector<f64>, report: &mut ConvexityReport| -> Result<()> {
        let e = model.eval(p)?;
        let eig = SymmetricEigen::new(e.hessian).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        report.min_eigenvalue = report.min_eigenvalue.min(lo);
        report.max_eigenvalue = report.max_eigenvalue.max(hi);
        if lo < b.lower - tolerance || hi > b.upper + tolerance {
            report.eigenvalue_violations += 1;
        }
        report.min_value = report.min_value.min(e.value);
        report.min_quadratic_margin = report
            .min_quadratic_margin
            .min(e.value - 0.5 * b.lower * p.norm_squared());
        Ok(())
    };
    record(&DVector::zeros(n), &mut report)?;
    for _ in 0..count {
        let p = DVector::from_iterator(n, bounds.iter().map(|(a, b)| rng.random_range(*a..=*b)));
        record(&p, &mut report)?;
    }
    report.pass = report.eigenvalue_violations == 0
        && report.value_at_origin.abs() <= tolerance
        && report.min_value >= -tolerance
        && report.min_quadratic_margin >= -tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{mollify, HamiltonianModel, PowerProfile};

    #[test]
    fn quadratic_passes_with_unit_range() {
        let m = HamiltonianModel::quadratic(2).unwrap();
        let r = check_h1_h2(&m, &[(-2.0, 2.0); 2], 200, 1e-9).unwrap();
        assert!(r.pass);
        assert_eq!((r.min_eigenvalue, r.max_eigenvalue), (1.0, 1.0));
    }

    #[test]
    fn power_family_with_exact_constants_passes() {
        let (lo, hi) = PowerProfile::new(4.0).unwrap().curvature_range(-2.0, 2.0);
        let m = HamiltonianModel::separable_power(2, 4.0, lo, hi).unwrap();
        let r = check_h1_h2(&m, &[(-2.0, 2.0); 2], 500, 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.min_eigenvalue >= 1.0 && r.max_eigenvalue <= 13.0);
    }

    #[test]
    fn overstated_lower_constant_is_flagged() {
        let m = HamiltonianModel::separable_power(2, 4.0, 1.5, 13.0).unwrap();
        let r = check_h1_h2(&m, &[(-2.0, 2.0); 2], 500, 1e-9).unwrap();
        assert!(!r.pass);
        assert!(r.eigenvalue_violations > 0);
    }

    #[test]
    fn mollification_keeps_constants() {
        let m = HamiltonianModel::separable_power_on_box(2, 4.0, 2.5).unwrap();
        let g = mollify(&m, 0.2).unwrap();
        let r = check_h1_h2(&g, &[(-2.0, 2.0); 2], 300, 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
