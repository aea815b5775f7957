//! Run configuration: TOML in, fully resolved TOML out.
//!
//! ```toml
//! seed = 0
//!
//! [model]
//! family = "quadratic"        # quadratic | anisotropic | separable-power | tabulated
//! dim = 2
//! gamma = 0.0                 # mollification radius, 0 = none
//!
//! [grid]
//! count = 49                  # nodes per axis
//!
//! [scenario]
//! kind = "flatness"           # flatness | stability | blowup
//! ```
//!
//! `[solver]` and `[output]` are optional; every default is written back by
//! [`emit_config`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{OUTER_HALF_WIDTH, SAMPLES_PER_AXIS};
use crate::hamiltonian::{mollify, Hamiltonian, HamiltonianModel, MollifiedModel, TabulatedProfile};
use crate::pde_solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Quadratic,
    Anisotropic,
    SeparablePower,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableBlock {
    pub start: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub family: FamilyName,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Separable power: `λ, Λ` are taken from the curvature on `[−r, r]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableBlock>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub count: usize,
    /// The box is `[−half_width, half_width]ⁿ`.
    #[serde(default)]
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataName {
    /// `|x₁|^{4/3} − |x₂|^{4/3}` (2D).
    Aronsson,
    /// `scale·x_n`.
    Affine,
    /// `scale·(0.7·x₁ + 0.3·sin(2·x_n))`.
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    /// The Aronsson profile sampled on the grid.
    ClosedForm,
    /// The regularized solution with Aronsson boundary data.
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    pub center: Vec<f64>,
    /// Require slope dispersion below the tolerance at this center.
    #[serde(default)]
    pub expect_differentiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioBlock {
    Flatness {
        #[serde(default)]
        tau: Option<Vec<f64>>,
        #[serde(default)]
        epsilon: Option<Vec<f64>>,
        /// Perturbation variants; variant `i` uses seed `seed + i`.
        #[serde(default)]
        variants: Option<usize>,
        /// Grid used once to calibrate `C_emp`.
        #[serde(default)]
        calibration_count: Option<usize>,
        #[serde(default)]
        mu: Option<f64>,
    },
    Stability {
        #[serde(default)]
        gammas: Option<Vec<f64>>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        data: Option<DataName>,
        #[serde(default)]
        scale: Option<f64>,
        #[serde(default)]
        c_emp: Option<f64>,
    },
    Blowup {
        #[serde(default)]
        field: Option<FieldSource>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        radii: Option<Vec<f64>>,
        #[serde(default)]
        dispersion_tolerance: Option<f64>,
        #[serde(default)]
        probes: Option<Vec<ProbeBlock>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    model: Option<ModelBlock>,
    grid: Option<GridBlock>,
    #[serde(default)]
    solver: SolverConfig,
    scenario: Option<ScenarioBlock>,
    #[serde(default)]
    output: OutputBlock,
}

/// A fully resolved configuration: after [`parse_config`] every optional
/// field of the blocks is filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub solver: SolverConfig,
    pub scenario: ScenarioBlock,
    pub output: OutputBlock,
}

/// The configured Hamiltonian: the base model and, when `γ > 0`, its
/// mollification.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub base: HamiltonianModel,
    pub mollified: Option<MollifiedModel>,
}

impl BuiltModel {
    pub fn hamiltonian(&self) -> &dyn Hamiltonian {
        match &self.mollified {
            Some(m) => m,
            None => &self.base,
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ModelBlock {
    fn base(&self) -> Result<HamiltonianModel> {
        let dim = self.dim;
        let need_dim = || dim.ok_or_else(|| Error::Config("model.dim is required".into()));
        let model = match self.family {
            FamilyName::Quadratic => HamiltonianModel::quadratic(need_dim()?)?,
            FamilyName::Anisotropic => {
                let rows = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Config("model.matrix is required for the anisotropic family".into()))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("model.matrix must be square".into()));
                }
                if dim.is_some_and(|d| d != n) {
                    return Err(Error::Config(format!("model.dim does not match the {n}×{n} matrix")));
                }
                HamiltonianModel::anisotropic(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
            }
            FamilyName::SeparablePower => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("model.alpha is required for the separable-power family".into()))?;
                match (self.lower, self.upper, self.half_width) {
                    (Some(lo), Some(hi), _) => HamiltonianModel::separable_power(need_dim()?, alpha, lo, hi)?,
                    (None, None, Some(r)) => HamiltonianModel::separable_power_on_box(need_dim()?, alpha, r)?,
                    _ => {
                        return Err(Error::Config(
                            "separable-power needs either lower and upper, or half_width".into(),
                        ))
                    }
                }
            }
            FamilyName::Tabulated => {
                let t = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("model.table is required for the tabulated family".into()))?;
                let (lo, hi) = self
                    .lower
                    .zip(self.upper)
                    .ok_or_else(|| Error::Config("tabulated family needs lower and upper".into()))?;
                let profile = TabulatedProfile::new(t.start, t.spacing, t.values.clone())?;
                HamiltonianModel::tabulated(need_dim()?, profile, lo, hi)?
            }
        };
        if self.family != FamilyName::SeparablePower && self.half_width.is_some() {
            return Err(Error::Config("model.half_width only applies to separable-power".into()));
        }
        Ok(model)
    }

    pub fn build(&self) -> Result<BuiltModel> {
        let base = self.base()?;
        let gamma = self.gamma.unwrap_or(0.0);
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("model.gamma must be nonnegative, got {gamma}")));
        }
        let mollified = if gamma > 0.0 { Some(mollify(&base, gamma)?) } else { None };
        Ok(BuiltModel { base, mollified })
    }

    fn resolve(mut self) -> Result<Self> {
        let base = self.base()?;
        self.dim = Some(base.dim());
        let b = base.bounds();
        self.lower = Some(b.lower);
        self.upper = Some(b.upper);
        self.half_width = None;
        self.gamma = Some(self.gamma.unwrap_or(0.0));
        self.build()?;
        Ok(self)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn resolve_scenario(scenario: ScenarioBlock, model: &ModelBlock, grid: &GridBlock) -> Result<ScenarioBlock> {
    let dim = model.dim.unwrap_or(0);
    let lower = model.lower.unwrap_or(1.0);
    Ok(match scenario {
        ScenarioBlock::Flatness {
            tau,
            epsilon,
            variants,
            calibration_count,
            mu,
        } => {
            let tau = tau.unwrap_or_else(|| vec![0.1, 0.03, 0.01]);
            let epsilon = epsilon.unwrap_or_else(|| vec![0.1, 0.05]);
            if tau.is_empty() || tau.iter().any(|t| !(0.0..1.0).contains(t)) {
                return Err(Error::Config(format!("scenario.tau must lie in [0, 1), got {tau:?}")));
            }
            for &e in &epsilon {
                positive("scenario.epsilon", e)?;
            }
            let variants = variants.unwrap_or(5);
            if variants == 0 {
                return Err(Error::Config("scenario.variants must be at least 1".into()));
            }
            let calibration_count = calibration_count.unwrap_or((grid.count - 1) / 2 + 1);
            if calibration_count < 3 {
                return Err(Error::Config("scenario.calibration_count must be at least 3".into()));
            }
            let mu = positive("scenario.mu", mu.unwrap_or(lower / (16.0 * dim as f64)))?;
            ScenarioBlock::Flatness {
                tau: Some(tau),
                epsilon: Some(epsilon),
                variants: Some(variants),
                calibration_count: Some(calibration_count),
                mu: Some(mu),
            }
        }
        ScenarioBlock::Stability {
            gammas,
            epsilon,
            data,
            scale,
            c_emp,
        } => {
            if model.gamma.unwrap_or(0.0) != 0.0 {
                return Err(Error::Config(
                    "the stability scenario mollifies the base model itself; set model.gamma = 0".into(),
                ));
            }
            let gammas = gammas.unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
            if gammas.is_empty() || gammas.windows(2).any(|w| w[1] >= w[0]) || gammas.iter().any(|g| !(*g > 0.0)) {
                return Err(Error::Config(format!(
                    "scenario.gammas must be positive and strictly decreasing, got {gammas:?}"
                )));
            }
            let data = data.unwrap_or(DataName::Wave);
            if data == DataName::Aronsson && dim != 2 {
                return Err(Error::Config("aronsson data is two-dimensional".into()));
            }
            ScenarioBlock::Stability {
                gammas: Some(gammas),
                epsilon: Some(positive("scenario.epsilon", epsilon.unwrap_or(0.05))?),
                data: Some(data),
                scale: Some(positive("scenario.scale", scale.unwrap_or(1.0))?),
                c_emp: Some(positive("scenario.c_emp", c_emp.unwrap_or(1.0))?),
            }
        }
        ScenarioBlock::Blowup {
            field,
            epsilon,
            radii,
            dispersion_tolerance,
            probes,
        } => {
            if dim != 2 {
                return Err(Error::Config("the blowup scenario probes the two-dimensional Aronsson profile".into()));
            }
            let radii = radii.unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125]);
            if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::Config(format!(
                    "scenario.radii must be positive and strictly decreasing, got {radii:?}"
                )));
            }
            let probes = probes.unwrap_or_else(|| {
                vec![
                    ProbeBlock {
                        center: vec![1.0, 1.0],
                        expect_differentiable: true,
                    },
                    ProbeBlock {
                        center: vec![0.0, 0.0],
                        expect_differentiable: false,
                    },
                ]
            });
            if probes.iter().any(|p| p.center.len() != 2) {
                return Err(Error::Config("probe centers must have 2 coordinates".into()));
            }
            ScenarioBlock::Blowup {
                field: Some(field.unwrap_or(FieldSource::ClosedForm)),
                epsilon: Some(positive("scenario.epsilon", epsilon.unwrap_or(0.01))?),
                radii: Some(radii),
                dispersion_tolerance: Some(positive(
                    "scenario.dispersion_tolerance",
                    dispersion_tolerance.unwrap_or(1e-3),
                )?),
                probes: Some(probes),
            }
        }
    })
}

/// Parses and resolves a configuration. Unknown keys and missing blocks are
/// config errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(config_error)?;
    let missing = |name: &str| Error::Config(format!("missing required block [{name}]"));
    let model = raw.model.ok_or_else(|| missing("model"))?.resolve()?;
    let scenario = raw.scenario.ok_or_else(|| missing("scenario"))?;
    let mut grid = raw.grid.ok_or_else(|| missing("grid"))?;
    if grid.count < 3 {
        return Err(Error::Config(format!("grid.count must be at least 3, got {}", grid.count)));
    }
    let default_half_width = match scenario {
        ScenarioBlock::Flatness { .. } => OUTER_HALF_WIDTH,
        ScenarioBlock::Blowup { .. } => 2.0,
        _ => 1.0,
    };
    let half_width = positive("grid.half_width", grid.half_width.unwrap_or(default_half_width))?;
    if matches!(scenario, ScenarioBlock::Flatness { .. }) && half_width != OUTER_HALF_WIDTH {
        return Err(Error::Config(format!(
            "the flatness scenario runs on [−{OUTER_HALF_WIDTH}, {OUTER_HALF_WIDTH}]ⁿ; grid.half_width must be {OUTER_HALF_WIDTH}"
        )));
    }
    grid.half_width = Some(half_width);
    raw.solver.validate()?;
    let scenario = resolve_scenario(scenario, &model, &grid)?;
    if let ScenarioBlock::Blowup { radii: Some(radii), probes: Some(probes), .. } = &scenario {
        for p in probes {
            if p.center.iter().any(|c| c.abs() + radii[0] > half_width + 1e-12) {
                return Err(Error::Config(format!(
                    "probe box of radius {} around {:?} leaves the grid",
                    radii[0], p.center
                )));
            }
        }
        if grid.count < 2 * SAMPLES_PER_AXIS {
            return Err(Error::Config("blowup probes need a finer grid".into()));
        }
    }
    if raw.output.formats.is_empty() {
        return Err(Error::Config("output.formats must not be empty".into()));
    }
    Ok(RunConfig {
        seed: raw.seed,
        model,
        grid,
        solver: raw.solver,
        scenario,
        output: raw.output,
    })
}

/// The resolved configuration as TOML; `parse_config(emit_config(c)) == c`.
pub fn emit_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(config_error)
}
