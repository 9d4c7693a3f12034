//! Scattering solutions and scattering data at high energy.
//!
//! An incoming trajectory `x(t) = P(t) + y₋(t)` is parametrized by a free
//! reference `P` built from the long-range flow and the deviation `y₋`,
//! found as the fixed point of a double-integral operator on the weighted
//! space `M_r` ([`space::MrFunction`]). Three parametrizations are offered
//! ([`Flavor`]):
//!
//! * `Standard`: `P = z₋(v₋, ·) + x₋`, data `(a, b)` with
//!   `b = x₋ + l + l₁ + l₂`;
//! * `Modified`: `P = z₋(v₋, x₋, ·)`, data `(ã, b̃)` where `b̃` comes from a
//!   second fixed point in a ball of offsets;
//! * `IterateN`: as `Standard` with the exact flows replaced by the explicit
//!   iterates `z_{±,N}`, `z_{±,N+1}`.
//!
//! Every improper integral is evaluated on one graded [`TimeGrid`] shared by
//! the incoming and outgoing flows, with the power-law tails beyond the
//! truncation added in closed form.

pub mod bounds;
mod data;
mod flow;
mod modified;
mod operator;
pub mod space;
mod theorems;

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub use bounds::{bound_constants, s_threshold, threshold_rhs, BoundConstants, ThresholdVariant};
pub use data::{
    assemble_scattering_data, compute_w, scatter, velocity_deflection, CorrectionVector,
    EstimateCheck, ScatteringDatum,
};
pub use modified::{solve_b_tilde, ModifiedFixedPoint, ModifiedMap};
pub use operator::{apply_a, solve_y_minus, AImage, IncomingSolve, ScatteringOperator};
pub use space::MrFunction;
pub use theorems::{
    born_threshold, high_energy_sweep, loglog_slope, richardson, straight_line_integrals,
    verify_theorem_bounds, BoundCheck, LineIntegrals, SweepRow, SweepTable, TheoremReport,
};

/// Parametrization of the incoming and outgoing free references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Standard,
    Modified,
    IterateN,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::Standard, Flavor::Modified, Flavor::IterateN];

    pub fn name(self) -> &'static str {
        match self {
            Flavor::Standard => "standard",
            Flavor::Modified => "modified",
            Flavor::IterateN => "iterate_n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub grid: GridSpec,
    /// Picard tolerance for `y₋` in the `M_r` norm.
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Picard tolerance for the free flows (`sup |g(t)/t|`).
    pub free_tol: f64,
    pub free_max_iter: usize,
    /// Tolerance for the offset fixed point of the modified data.
    pub offset_tol: f64,
    /// Radius of the ball in `M_r`; `None` picks a default and halves it
    /// while the self-map condition fails.
    pub r: Option<f64>,
    /// Extra probe points per node gap in `M_r` norms.
    pub probes: usize,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            grid: GridSpec::default(),
            picard_tol: 1e-13,
            max_iter: 100,
            free_tol: 1e-13,
            free_max_iter: 200,
            offset_tol: 1e-14,
            r: None,
            probes: 1,
        }
    }
}

impl ScatterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0 && self.free_tol > 0.0 && self.offset_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.free_max_iter == 0 {
            return Err(Error::Domain("iteration limits must be positive".into()));
        }
        if !(self.grid.panel_width > 0.0 && self.grid.growth > 0.0 && self.grid.points >= 3) {
            return Err(Error::Domain(
                "grid needs positive panel width and growth, points >= 3".into(),
            ));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("r must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Same settings on a grid with every panel split in two.
    pub fn refined(&self) -> ScatterConfig {
        ScatterConfig {
            grid: self.grid.refined(),
            ..*self
        }
    }
}

/// Default ball radius before any halving.
pub fn default_radius(flavor: Flavor, x_norm: f64) -> f64 {
    match flavor {
        Flavor::Standard | Flavor::IterateN => 0.5f64.min(0.5 * (1.0 + x_norm / SQRT_2)),
        Flavor::Modified => 0.5f64.min(0.5 * (0.5 + x_norm / (2.0 * SQRT_2))),
    }
}

/// Radius of the ball holding the offset fixed point of the modified data.
pub fn offset_ball_radius(x_norm: f64) -> f64 {
    0.25 + x_norm / (4.0 * SQRT_2)
}
