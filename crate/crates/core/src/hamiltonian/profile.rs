//! One-dimensional profiles `φ` for separable Hamiltonians `H(p) = Σᵢ φ(pᵢ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value and first two derivatives of a profile at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

/// `φ(t) = ((1 + t²)^{α/2} − 1) / α`.
///
/// `φ''(t) = (1 + t²)^{α/2 − 2} (1 + (α − 1) t²)`, which is bounded away from
/// zero and infinity on every bounded interval, so the separable sum is
/// strongly convex and strongly concave on boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub alpha: f64,
}

impl PowerProfile {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 1.0 || alpha == 2.0 {
            return Err(Error::Config(format!(
                "separable-power exponent must lie in (1,2)∪(2,∞), got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn jet(&self, t: f64) -> ProfileJet {
        let a = self.alpha;
        let s = 1.0 + t * t;
        ProfileJet {
            value: (s.powf(0.5 * a) - 1.0) / a,
            slope: t * s.powf(0.5 * a - 1.0),
            curvature: s.powf(0.5 * a - 2.0) * (1.0 + (a - 1.0) * t * t),
        }
    }

    /// Exact range of `φ''` over `[lo, hi]`.
    ///
    /// `φ''` is even; on `t ≥ 0` it is monotone increasing for `α > 2` and
    /// decreasing for `α < 2`, so the extremes sit at `|t| = 0` or `max |t|`.
    pub fn curvature_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let t_max = lo.abs().max(hi.abs());
        let t_min = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        };
        let c0 = self.jet(t_min).curvature;
        let c1 = self.jet(t_max).curvature;
        (c0.min(c1), c0.max(c1))
    }
}

/// Natural cubic spline through uniformly spaced samples of a profile.
///
/// Evaluation outside `[start, start + (len − 1)·spacing]` is a domain error;
/// the table is never extrapolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct TabulatedProfile {
    start: f64,
    spacing: f64,
    values: Vec<f64>,
    moments: Vec<f64>,
}

/// Serialized form of a table: knots `start + k·spacing` and their values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub start: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl TryFrom<TableSpec> for TabulatedProfile {
    type Error = Error;

    fn try_from(spec: TableSpec) -> Result<Self> {
        TabulatedProfile::new(spec.start, spec.spacing, spec.values)
    }
}

impl From<TabulatedProfile> for TableSpec {
    fn from(t: TabulatedProfile) -> Self {
        TableSpec {
            start: t.start,
            spacing: t.spacing,
            values: t.values,
        }
    }
}

impl TabulatedProfile {
    /// Relative tolerance for the knot-slope consistency check.
    pub const SLOPE_TOLERANCE: f64 = 1e-2;

    /// Builds the spline. The table must contain `t = 0` as a knot with value 0,
    /// and the spline slope at every interior knot must agree with the centered
    /// difference of the table to [`Self::SLOPE_TOLERANCE`].
    pub fn new(start: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Config("tabulated profile needs at least 4 knots".into()));
        }
        if !(spacing > 0.0) || !start.is_finite() || !spacing.is_finite() {
            return Err(Error::Config("tabulated profile spacing must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tabulated profile values must be finite".into()));
        }
        let zero_pos = -start / spacing;
        let zero_idx = zero_pos.round();
        if (zero_pos - zero_idx).abs() > 1e-9
            || zero_idx < 0.0
            || zero_idx as usize >= values.len()
        {
            return Err(Error::Config("tabulated profile must have a knot at t = 0".into()));
        }
        if values[zero_idx as usize].abs() > 1e-12 {
            return Err(Error::Config("tabulated profile must vanish at t = 0".into()));
        }
        let moments = natural_moments(&values, spacing);
        let profile = Self {
            start,
            spacing,
            values,
            moments,
        };
        profile.check_slopes()?;
        Ok(profile)
    }

    /// Samples a closed-form profile on `count` uniform knots over `[-half_width, half_width]`.
    pub fn sample(half_width: f64, count: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if count < 5 || count.is_multiple_of(2) {
            return Err(Error::Config("sampled table needs an odd knot count ≥ 5".into()));
        }
        let spacing = 2.0 * half_width / (count - 1) as f64;
        let values = (0..count)
            .map(|k| {
                if 2 * k + 1 == count {
                    0.0
                } else {
                    f(-half_width + k as f64 * spacing)
                }
            })
            .collect();
        Self::new(-half_width, spacing, values)
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.start,
            self.start + (self.values.len() - 1) as f64 * self.spacing,
        )
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_slopes(&self) -> Result<()> {
        let h = self.spacing;
        let scale = 1.0
            + self
                .values
                .windows(2)
                .map(|w| ((w[1] - w[0]) / h).abs())
                .fold(0.0, f64::max);
        for k in 1..self.values.len() - 1 {
            let t = self.start + k as f64 * h;
            let spline = self.jet(t)?.slope;
            let centered = (self.values[k + 1] - self.values[k - 1]) / (2.0 * h);
            if (spline - centered).abs() > Self::SLOPE_TOLERANCE * scale {
                return Err(Error::Config(format!(
                    "tabulated profile slope inconsistent at knot {k}: spline {spline}, table {centered}"
                )));
            }
        }
        Ok(())
    }

    pub fn jet(&self, t: f64) -> Result<ProfileJet> {
        let (lo, hi) = self.range();
        if !(t >= lo - 1e-12 && t <= hi + 1e-12) {
            return Err(Error::Domain(format!(
                "tabulated profile queried at {t}, table covers [{lo}, {hi}]"
            )));
        }
        let h = self.spacing;
        let last = self.values.len() - 2;
        let k = (((t - self.start) / h).floor().max(0.0) as usize).min(last);
        let t0 = self.start + k as f64 * h;
        let b = (t - t0) / h;
        let a = 1.0 - b;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.moments[k], self.moments[k + 1]);
        Ok(ProfileJet {
            value: a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            slope: (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0,
            curvature: a * m0 + b * m1,
        })
    }
}

/// Second derivatives of the natural spline (Thomas algorithm).
fn natural_moments(y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len();
    let mut moments = vec![0.0; m];
    if m < 3 {
        return moments;
    }
    let inner = m - 2;
    let mut diag = vec![4.0; inner];
    let mut rhs: Vec<f64> = (1..m - 1)
        .map(|k| 6.0 * (y[k + 1] - 2.0 * y[k] + y[k - 1]) / (h * h))
        .collect();
    for i in 1..inner {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    moments[inner] = rhs[inner - 1] / diag[inner - 1];
    for i in (0..inner - 1).rev() {
        moments[i + 1] = (rhs[i] - moments[i + 2]) / diag[i];
    }
    moments
}
