//! Blow-up probe: affine fits of `(u(x + r·y) − u(x))/r` on the unit box.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridField;

/// Sample nodes per axis on the unit box `[−1, 1]ⁿ`.
pub const SAMPLES_PER_AXIS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusFit {
    pub radius: f64,
    pub slope: Vec<f64>,
    pub intercept: f64,
    /// Sup over the samples of `|v_r − affine fit|`.
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub center: Vec<f64>,
    pub samples: usize,
    pub fits: Vec<RadiusFit>,
    /// Largest pairwise slope distance over the last three radii.
    pub dispersion: f64,
}

/// Fits an affine map to each rescaling `v_r(y) = (u(c + r·y) − u(c))/r` by
/// least squares over `9ⁿ` samples of `[−1, 1]ⁿ`; `u` is interpolated
/// multilinearly.
pub fn blowup_probe(u: &GridField, center: &[f64], radii: &[f64]) -> Result<BlowupReport> {
    let grid = u.grid();
    let n = grid.dim();
    if center.len() != n {
        return Err(Error::Input(format!("center must have {n} coordinates")));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Input(format!("radii must be positive and strictly decreasing, got {radii:?}")));
    }
    for a in 0..n {
        if center[a] - radii[0] < grid.lower()[a] - 1e-12 || center[a] + radii[0] > grid.upper()[a] + 1e-12 {
            return Err(Error::Input(format!(
                "box of radius {} around {center:?} leaves the domain",
                radii[0]
            )));
        }
    }
    let m = SAMPLES_PER_AXIS;
    let count = m.pow(n as u32);
    let points: Vec<Vec<f64>> = (0..count)
        .map(|k| {
            let mut rest = k;
            (0..n)
                .map(|_| {
                    let i = rest % m;
                    rest /= m;
                    -1.0 + 2.0 * i as f64 / (m - 1) as f64
                })
                .collect()
        })
        .collect();
    let design = DMatrix::from_fn(count, n + 1, |i, j| if j == 0 { 1.0 } else { points[i][j - 1] });
    let normal = (design.transpose() * &design)
        .cholesky()
        .ok_or_else(|| Error::numerical("singular least-squares system", vec![]))?;

    let base = u.interpolate(center)?;
    let mut fits = Vec::with_capacity(radii.len());
    for &r in radii {
        let v = points
            .iter()
            .map(|y| {
                let x: Vec<f64> = (0..n).map(|a| center[a] + r * y[a]).collect();
                Ok((u.interpolate(&x)? - base) / r)
            })
            .collect::<Result<Vec<f64>>>()?;
        let v = DVector::from_vec(v);
        let coef = normal.solve(&(design.transpose() * &v));
        let sup_deviation = (&design * &coef - &v).amax();
        fits.push(RadiusFit {
            radius: r,
            slope: coef.iter().skip(1).copied().collect(),
            intercept: coef[0],
            sup_deviation,
        });
    }
    let tail = &fits[fits.len().saturating_sub(3)..];
    let mut dispersion = 0.0f64;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            let d = tail[i]
                .slope
                .iter()
                .zip(&tail[j].slope)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dispersion = dispersion.max(d);
        }
    }
    Ok(BlowupReport {
        center: center.to_vec(),
        samples: count,
        fits,
        dispersion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn affine_field_has_zero_dispersion() {
        let grid = Grid::cube(2, 1.0, 21).unwrap();
        let u = GridField::from_fn(grid, |x| x[1]).unwrap();
        let r = blowup_probe(&u, &[0.1, -0.2], &[0.5, 0.25, 0.125]).unwrap();
        assert!(r.dispersion < 1e-12);
        for f in &r.fits {
            assert!((f.slope[0]).abs() < 1e-12 && (f.slope[1] - 1.0).abs() < 1e-12);
            assert!(f.sup_deviation < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_radii() {
        let grid = Grid::cube(2, 1.0, 11).unwrap();
        let u = GridField::constant(grid, 1.0);
        assert!(matches!(blowup_probe(&u, &[0.8, 0.0], &[0.5]), Err(Error::Input(_))));
        assert!(matches!(blowup_probe(&u, &[0.0, 0.0], &[0.1, 0.2]), Err(Error::Input(_))));
    }
}
