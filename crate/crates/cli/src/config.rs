//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use lrscatter::free_dynamics::{Backend, Sign};
use lrscatter::oracle::OracleConfig;
use lrscatter::potentials::{demo_field, DecayProfile, Family, ForceField};
use lrscatter::scattering::{Flavor, ScatterConfig};
use lrscatter::vecops::{dot, norm};
use lrscatter::xray::ReconTarget;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldSpec,
    pub experiment: Experiment,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Worker threads; `--jobs` takes precedence, default is all cores.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Seed for randomly drawn inputs; `--seed` takes precedence.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scatter: ScatterConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Regularized Coulomb tail plus an off-center Gaussian bump.
    Demo {},
    Zero {
        dim: usize,
    },
    Families {
        dim: usize,
        alpha: f64,
        #[serde(default)]
        long: Vec<Family>,
        #[serde(default)]
        short: Vec<Family>,
        /// Hand-declared decay constants replacing the computed ones.
        #[serde(default)]
        beta_l: Option<[f64; 3]>,
        #[serde(default)]
        beta_s: Option<[f64; 3]>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<ForceField, CliError> {
        let field = match self {
            FieldSpec::Demo {} => demo_field(),
            FieldSpec::Zero { dim } => {
                if *dim < 2 {
                    return Err(CliError::config(
                        "field.dim",
                        "dimension must be at least 2",
                    ));
                }
                ForceField::zero(*dim)
            }
            FieldSpec::Families {
                dim,
                alpha,
                long,
                short,
                beta_l,
                beta_s,
            } => {
                let field = ForceField::from_families(*dim, *alpha, long.clone(), short.clone())
                    .map_err(|e| CliError::config("field", e.to_string()))?;
                if beta_l.is_none() && beta_s.is_none() {
                    field
                } else {
                    let p = field.profile();
                    let profile = DecayProfile {
                        beta_l: beta_l.unwrap_or(p.beta_l),
                        beta_s: beta_s.unwrap_or(p.beta_s),
                        ..*p
                    };
                    field
                        .with_profile(profile)
                        .map_err(|e| CliError::config("field.beta", e.to_string()))?
                }
            }
        };
        Ok(field)
    }
}

/// One incoming asymptote `(v₋, x₋)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Input {
    pub v: Vec<f64>,
    pub x: Vec<f64>,
}

/// Inputs drawn from the seed: uniform direction, speed and offset length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInputs {
    pub count: usize,
    pub speed: [f64; 2],
    pub offset: [f64; 2],
}

/// A line `{tθ + x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

/// Speeds given explicitly or as multiples of the Born threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLadder {
    #[serde(default)]
    pub speeds: Option<Vec<f64>>,
    #[serde(default)]
    pub threshold_factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Free {
        w: Vec<f64>,
        x: Vec<f64>,
        #[serde(default)]
        h: Option<Vec<f64>>,
        #[serde(default = "plus")]
        sign: Sign,
        #[serde(default = "exact")]
        backend: Backend,
    },
    Scatter {
        #[serde(default)]
        inputs: Vec<Input>,
        #[serde(default)]
        random: Option<RandomInputs>,
        #[serde(default = "standard")]
        flavor: Flavor,
    },
    Sweep {
        lines: Vec<Line>,
        ladder: SpeedLadder,
        #[serde(default = "standard")]
        flavor: Flavor,
        #[serde(default = "one")]
        richardson_order: f64,
    },
    Reconstruct {
        #[serde(default = "force")]
        target: ReconTarget,
        #[serde(default = "standard")]
        flavor: Flavor,
        angles: usize,
        offsets: usize,
        offset_max: f64,
        grid_size: usize,
        extent: f64,
        ladder: SpeedLadder,
        #[serde(default = "one")]
        richardson_order: f64,
    },
    Verify {
        lines: Vec<Line>,
        ladder: SpeedLadder,
        #[serde(default = "standard")]
        flavor: Flavor,
    },
    OracleCheck {
        #[serde(default)]
        inputs: Vec<Input>,
        #[serde(default)]
        random: Option<RandomInputs>,
        #[serde(default)]
        oracle: OracleConfig,
    },
}

fn plus() -> Sign {
    Sign::Plus
}

fn exact() -> Backend {
    Backend::ExactFixedPoint
}

fn standard() -> Flavor {
    Flavor::Standard
}

fn one() -> f64 {
    1.0
}

fn force() -> ReconTarget {
    ReconTarget::ForceFromA
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Free { .. } => "free",
            Experiment::Scatter { .. } => "scatter",
            Experiment::Sweep { .. } => "sweep",
            Experiment::Reconstruct { .. } => "reconstruct",
            Experiment::Verify { .. } => "verify",
            Experiment::OracleCheck { .. } => "oracle-check",
        }
    }
}

/// Parsed configuration together with the raw bytes it was read from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::config("config", e.message().to_string()))?;
    Ok(Loaded {
        config,
        text,
        path: path.to_path_buf(),
    })
}

fn check_vec(name: &str, v: &[f64], dim: usize) -> Result<(), CliError> {
    if v.len() != dim {
        return Err(CliError::config(
            name,
            format!("expected {dim} components, got {}", v.len()),
        ));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(CliError::config(name, "components must be finite"));
    }
    Ok(())
}

fn check_orthogonal(name: &str, a: &[f64], b: &[f64]) -> Result<(), CliError> {
    if dot(a, b).abs() > 1e-10 * norm(a) * norm(b) {
        return Err(CliError::config(
            name,
            "velocity and offset must be orthogonal",
        ));
    }
    Ok(())
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), CliError> {
    if !(r[0] >= 0.0 && r[1] >= r[0] && r[1].is_finite()) {
        return Err(CliError::config(
            name,
            "range must satisfy 0 <= lo <= hi < inf",
        ));
    }
    Ok(())
}

fn check_ladder(name: &str, ladder: &SpeedLadder, min_len: usize) -> Result<(), CliError> {
    let values = match (&ladder.speeds, &ladder.threshold_factors) {
        (Some(s), None) => s,
        (None, Some(f)) => f,
        _ => {
            return Err(CliError::config(
                name,
                "give exactly one of speeds or threshold_factors",
            ))
        }
    };
    if values.len() < min_len {
        return Err(CliError::config(
            name,
            format!("needs at least {min_len} entries"),
        ));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0))
        || values.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(CliError::config(
            name,
            "entries must be positive and increasing",
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Schema-level checks that need no numerics.
    pub fn validate(&self, field: &ForceField) -> Result<(), CliError> {
        let dim = field.dim();
        self.scatter
            .validate()
            .map_err(|e| CliError::config("scatter", e.to_string()))?;
        if let Some(r) = self.scatter.r {
            // the ball radius must lie below 1 for every flavor's threshold equation
            if !(r > 0.0 && r < 1.0) {
                return Err(CliError::config(
                    "scatter.r",
                    format!("r = {r} must lie in (0, 1)"),
                ));
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::config("jobs", "must be positive"));
        }
        match &self.experiment {
            Experiment::Free { w, x, h, .. } => {
                check_vec("experiment.w", w, dim)?;
                check_vec("experiment.x", x, dim)?;
                if let Some(h) = h {
                    check_vec("experiment.h", h, dim)?;
                }
                check_orthogonal("experiment.x", w, x)?;
            }
            Experiment::Scatter { inputs, random, .. }
            | Experiment::OracleCheck { inputs, random, .. } => {
                if inputs.is_empty() && random.is_none() {
                    return Err(CliError::config(
                        "experiment.inputs",
                        "give inputs or random",
                    ));
                }
                for (i, inp) in inputs.iter().enumerate() {
                    check_vec(&format!("experiment.inputs[{i}].v"), &inp.v, dim)?;
                    check_vec(&format!("experiment.inputs[{i}].x"), &inp.x, dim)?;
                    check_orthogonal(&format!("experiment.inputs[{i}].x"), &inp.v, &inp.x)?;
                }
                if let Some(r) = random {
                    check_range("experiment.random.speed", r.speed)?;
                    check_range("experiment.random.offset", r.offset)?;
                    if r.speed[0] <= 0.0 {
                        return Err(CliError::config(
                            "experiment.random.speed",
                            "speeds must be positive",
                        ));
                    }
                }
                if let Experiment::OracleCheck { oracle, .. } = &self.experiment {
                    oracle
                        .validate()
                        .map_err(|e| CliError::config("experiment.oracle", e.to_string()))?;
                }
            }
            Experiment::Sweep {
                lines,
                ladder,
                richardson_order,
                ..
            } => {
                check_lines(lines, dim)?;
                check_ladder("experiment.ladder", ladder, 2)?;
                if !(*richardson_order > 0.0) {
                    return Err(CliError::config(
                        "experiment.richardson_order",
                        "must be positive",
                    ));
                }
            }
            Experiment::Verify {
                lines,
                ladder,
                flavor,
            } => {
                check_lines(lines, dim)?;
                check_ladder("experiment.ladder", ladder, 1)?;
                if *flavor == Flavor::IterateN {
                    return Err(CliError::config(
                        "experiment.flavor",
                        "bounds exist for standard and modified only",
                    ));
                }
            }
            Experiment::Reconstruct {
                angles,
                offsets,
                offset_max,
                grid_size,
                extent,
                ladder,
                richardson_order,
                ..
            } => {
                if dim != 2 {
                    return Err(CliError::config(
                        "field.dim",
                        "reconstruction needs a planar field",
                    ));
                }
                if *angles < 2 || *offsets < 3 || !(*offset_max > 0.0) {
                    return Err(CliError::config(
                        "experiment.angles",
                        "need angles >= 2, offsets >= 3, offset_max > 0",
                    ));
                }
                if *grid_size < 2 || !(*extent > 0.0) {
                    return Err(CliError::config(
                        "experiment.grid_size",
                        "need grid_size >= 2 and extent > 0",
                    ));
                }
                check_ladder("experiment.ladder", ladder, 2)?;
                if !(*richardson_order > 0.0) {
                    return Err(CliError::config(
                        "experiment.richardson_order",
                        "must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_lines(lines: &[Line], dim: usize) -> Result<(), CliError> {
    if lines.is_empty() {
        return Err(CliError::config(
            "experiment.lines",
            "at least one line is required",
        ));
    }
    for (i, l) in lines.iter().enumerate() {
        check_vec(&format!("experiment.lines[{i}].theta"), &l.theta, dim)?;
        check_vec(&format!("experiment.lines[{i}].x"), &l.x, dim)?;
        if norm(&l.theta) == 0.0 {
            return Err(CliError::config(
                &format!("experiment.lines[{i}].theta"),
                "direction must be nonzero",
            ));
        }
        check_orthogonal(&format!("experiment.lines[{i}].x"), &l.theta, &l.x)?;
    }
    Ok(())
}
