//! The incoming operators `A`, `𝒜`, `A_N` and their Picard fixed point.

use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::potentials::ForceField;
use crate::trajectory::{Diagnostics, Trajectory};
use crate::vecops::{dist, norm, Samples};

use super::bounds::{bound_constants, s_threshold, BoundConstants, ThresholdVariant};
use super::flow::{check_speed, double_from_past, orthogonalize, IncomingFlow};
use super::space::{weighted_norm, MrFunction};
use super::{default_radius, Flavor, ScatterConfig};

/// `f ↦ ∫_{-∞}^t ∫_{-∞}^σ (F(P + f) - F^l(Q))` for one `(v₋, x₋, flavor)`.
#[derive(Debug, Clone)]
pub struct ScatteringOperator {
    field: ForceField,
    flow: Arc<IncomingFlow>,
    cfg: ScatterConfig,
}

/// Image of the operator with its derivative and diagnostics.
#[derive(Debug, Clone)]
pub struct AImage {
    pub image: MrFunction,
    /// `d/dt` of the image, i.e. the inner integral.
    pub velocity: Samples,
    pub norm: f64,
    /// Size of the closed-form tail corrections beyond the grid.
    pub tail_bound: f64,
}

impl ScatteringOperator {
    /// Checks the preconditions and builds the free reference.
    pub fn new(
        field: &ForceField,
        v_minus: &[f64],
        x_minus: &[f64],
        flavor: Flavor,
        cfg: &ScatterConfig,
    ) -> Result<Self> {
        Self::build(field, v_minus, x_minus, flavor, cfg, None)
    }

    /// As [`Self::new`] on an explicit grid.
    pub fn on_grid(
        field: &ForceField,
        v_minus: &[f64],
        x_minus: &[f64],
        flavor: Flavor,
        cfg: &ScatterConfig,
        grid: Arc<TimeGrid>,
    ) -> Result<Self> {
        Self::build(field, v_minus, x_minus, flavor, cfg, Some(grid))
    }

    fn build(
        field: &ForceField,
        v: &[f64],
        x: &[f64],
        flavor: Flavor,
        cfg: &ScatterConfig,
        grid: Option<Arc<TimeGrid>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if v.len() != field.dim() {
            return Err(Error::Domain(format!(
                "expected {} components, got {}",
                field.dim(),
                v.len()
            )));
        }
        let x = orthogonalize(v, x)?;
        check_speed(field, v, &x, flavor)?;
        let flow = IncomingFlow::new(field, v, &x, flavor, cfg, grid)?;
        Ok(ScatteringOperator {
            field: field.clone(),
            flow: Arc::new(flow),
            cfg: *cfg,
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.flow.grid
    }

    pub fn flavor(&self) -> Flavor {
        self.flow.flavor
    }

    pub fn v_minus(&self) -> &[f64] {
        &self.flow.v
    }

    /// `x₋` after re-projection onto `v₋^⊥`.
    pub fn x_minus(&self) -> &[f64] {
        &self.flow.x
    }

    pub fn field(&self) -> &ForceField {
        &self.field
    }

    pub fn config(&self) -> &ScatterConfig {
        &self.cfg
    }

    pub(crate) fn flow(&self) -> &Arc<IncomingFlow> {
        &self.flow
    }

    pub fn constants(&self, r: f64) -> Result<BoundConstants> {
        bound_constants(
            self.field.profile(),
            norm(&self.flow.x),
            norm(&self.flow.v),
            r,
        )
    }

    /// `ρ` for the standard and iterate flavors, `ρ̃` for the modified one.
    pub fn self_map_bound(&self, bc: &BoundConstants) -> f64 {
        match self.flow.flavor {
            Flavor::Modified => bc.rho_tilde,
            _ => bc.rho,
        }
    }

    /// The trajectory `P + f`.
    pub fn positions(&self, f: &Samples) -> Samples {
        self.flow.position.add(f)
    }

    pub fn apply(&self, f: &MrFunction) -> Result<AImage> {
        let grid = &self.flow.grid;
        if f.values().len() != grid.len() || f.dim() != self.field.dim() {
            return Err(Error::Usage(
                "argument does not live on the operator grid".into(),
            ));
        }
        if !(Arc::ptr_eq(f.grid(), grid) || f.grid().nodes() == grid.nodes()) {
            return Err(Error::Usage(
                "argument does not live on the operator grid".into(),
            ));
        }
        let x = self.positions(f.values());
        let dim = x.dim;
        let mut g = Samples::zeros(x.len(), dim);
        for (i, o) in g.data.chunks_exact_mut(dim).enumerate() {
            self.field.force(x.row(i), o);
            for (o, r) in o.iter_mut().zip(self.flow.reference_force.row(i)) {
                *o -= r;
            }
        }
        if g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "non-finite force along the incoming trajectory".into(),
            ));
        }
        let (outer, inner, tail) = double_from_past(grid, &g, self.flow.alpha);
        let image = MrFunction::new(grid.clone(), outer, f.r())?.with_probes(self.cfg.probes);
        let n = image.norm();
        Ok(AImage {
            image,
            velocity: inner,
            norm: n,
            tail_bound: tail,
        })
    }

    /// Picard iteration for `y₋ = A(y₋)` in `M_r`.
    ///
    /// With `r = None` the default radius is halved (up to 30 times) while
    /// the self-map bound exceeds `r`.
    pub fn solve(&self, r: Option<f64>) -> Result<IncomingSolve> {
        let x_norm = norm(&self.flow.x);
        let flavor = self.flow.flavor;
        let (r, bc) = self.choose_radius(r.or(self.cfg.r), x_norm)?;
        let grid = self.flow.grid.clone();
        let dim = self.field.dim();
        let mut f = MrFunction::zeros(grid.clone(), dim, r)?.with_probes(self.cfg.probes);
        let mut velocity = Samples::zeros(grid.len(), dim);
        let mut residuals = Vec::new();
        let mut tail = 0.0;
        let mut converged = false;
        for _ in 0..self.cfg.max_iter {
            let img = self.apply(&f)?;
            let diff = img.image.values().sub(f.values());
            let res = weighted_norm(grid.nodes(), &diff);
            residuals.push(res);
            let floor = 64.0 * f64::EPSILON * (1.0 + img.image.node_norm());
            f = img.image;
            velocity = img.velocity;
            tail = img.tail_bound;
            if res <= self.cfg.picard_tol || res <= floor {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: format!("{} incoming Picard iteration", flavor.name()),
                iterations: self.cfg.max_iter,
                last: *residuals.last().unwrap_or(&f64::INFINITY),
                residuals,
            });
        }
        let bound = self.self_map_bound(&bc);
        let fixed_norm = f.norm();
        if fixed_norm > r * (1.0 + 1e-9) {
            return Err(Error::Invariant(format!(
                "fixed point left the ball: norm {fixed_norm:.6e} > r = {r:.6e} (bound {bound:.6e})"
            )));
        }
        let measured_ratio = measured_ratio(&residuals);
        debug!(
            "{} y- solve: {} iterations, residual {:.3e}, ratio {:.3e} (lambda {:.3e})",
            flavor.name(),
            residuals.len(),
            residuals.last().unwrap(),
            measured_ratio,
            bc.lambda
        );
        Ok(IncomingSolve {
            operator: self.clone(),
            y_minus: f,
            y_velocity: velocity,
            constants: bc,
            residuals,
            measured_ratio,
            tail_bound: tail,
        })
    }

    fn choose_radius(&self, r: Option<f64>, x_norm: f64) -> Result<(f64, BoundConstants)> {
        let v_norm = norm(&self.flow.v);
        let (mut r, halving) = match r {
            Some(r) => (r, false),
            None => (default_radius(self.flow.flavor, x_norm), true),
        };
        let mut bc = self.constants(r)?;
        if halving {
            let ok = |bc: &BoundConstants, r: f64| self.self_map_bound(bc) <= r && bc.lambda < 1.0;
            let mut cand = r;
            for _ in 0..30 {
                if ok(&bc, r) {
                    break;
                }
                cand *= 0.5;
                let next = self.constants(cand)?;
                if ok(&next, cand) {
                    r = cand;
                    bc = next;
                    break;
                }
            }
        }
        let hint = || {
            let beta = self.field.profile().beta();
            match s_threshold(
                x_norm,
                r.min(0.5),
                beta,
                self.field.profile().alpha,
                ThresholdVariant::S0,
                self.field.dim(),
            ) {
                Ok(s0) => {
                    format!("increase |v| (currently {v_norm:.6e}); the threshold s0 is {s0:.6e}")
                }
                Err(_) => "increase |v|".to_string(),
            }
        };
        let bound = self.self_map_bound(&bc);
        if !(bound <= r) {
            let name = match self.flow.flavor {
                Flavor::Modified => "self-map rho_tilde <= r",
                _ => "self-map rho <= r",
            };
            return Err(Error::infeasible(name, bound, r).with_hint(hint()));
        }
        if !(bc.lambda < 1.0) {
            return Err(
                Error::infeasible("contraction lambda < 1", bc.lambda, 1.0).with_hint(hint())
            );
        }
        Ok((r, bc))
    }
}

/// Largest ratio of successive Picard residuals above round-off level.
fn measured_ratio(res: &[f64]) -> f64 {
    let scale = res.first().copied().unwrap_or(0.0);
    res.windows(2)
        .filter(|w| w[0] > 1e4 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) && w[0] > 1e-14)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

/// A converged incoming deviation together with its operator.
#[derive(Debug, Clone)]
pub struct IncomingSolve {
    pub operator: ScatteringOperator,
    pub y_minus: MrFunction,
    pub y_velocity: Samples,
    pub constants: BoundConstants,
    /// Picard residuals `‖y_{k+1} - y_k‖` (node norm).
    pub residuals: Vec<f64>,
    /// Largest observed residual ratio (compare with `λ`).
    pub measured_ratio: f64,
    pub tail_bound: f64,
}

impl IncomingSolve {
    pub fn flavor(&self) -> Flavor {
        self.operator.flavor()
    }

    pub fn r(&self) -> f64 {
        self.y_minus.r()
    }

    /// Positions of the scattering solution at the grid nodes.
    pub fn positions(&self) -> Samples {
        self.operator.positions(self.y_minus.values())
    }

    pub fn velocities(&self) -> Samples {
        self.operator.flow().velocity.add(&self.y_velocity)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let t = self.operator.grid().nodes().to_vec();
        Ok(
            Trajectory::new(t, self.positions(), self.velocities())?.with_diagnostics(
                Diagnostics {
                    iterations: self.residuals.len(),
                    residual: *self.residuals.last().unwrap_or(&0.0),
                    residuals: self.residuals.clone(),
                    tail_bound: self.tail_bound,
                },
            ),
        )
    }

    /// `max |ẍ - F(x)| / max |F(x)|` over nodes with `|t| ≤ window`, with
    /// `ẍ` from panel-wise spectral differentiation of the positions.
    pub fn newton_residual(&self, window: f64) -> f64 {
        let grid = self.operator.grid();
        let t = grid.nodes();
        let v0 = self.operator.v_minus();
        let x0 = self.operator.x_minus();
        // The straight line has zero second derivative; removing it keeps
        // rounding in the differentiation small.
        let bent = self
            .positions()
            .sub(&Samples::from_fn(t.len(), v0.len(), |i, o| {
                for k in 0..o.len() {
                    o[k] = x0[k] + t[i] * v0[k];
                }
            }));
        let acc = grid.second_derivative(&bent);
        let x = self.positions();
        let field = self.operator.field();
        let mut f = vec![0.0; x.dim];
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..t.len() {
            if t[i].abs() > window {
                continue;
            }
            field.force(x.row(i), &mut f);
            scale = scale.max(norm(&f));
            worst = worst.max(dist(acc.row(i), &f));
        }
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

/// One application of the operator selected by `flavor` to `f`, on the
/// grid carried by `f`.
pub fn apply_a(
    field: &ForceField,
    v_minus: &[f64],
    x_minus: &[f64],
    f: &MrFunction,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<AImage> {
    ScatteringOperator::on_grid(field, v_minus, x_minus, flavor, cfg, f.grid().clone())?.apply(f)
}

/// Solves `y₋ = A(y₋)` for the chosen flavor.
pub fn solve_y_minus(
    field: &ForceField,
    v_minus: &[f64],
    x_minus: &[f64],
    r: Option<f64>,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<IncomingSolve> {
    ScatteringOperator::new(field, v_minus, x_minus, flavor, cfg)?.solve(r)
}

/// Serializable summary of an incoming solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomingSummary {
    pub r: f64,
    pub iterations: usize,
    pub residual: f64,
    pub measured_ratio: f64,
    pub lambda: f64,
}

impl From<&IncomingSolve> for IncomingSummary {
    fn from(s: &IncomingSolve) -> Self {
        IncomingSummary {
            r: s.r(),
            iterations: s.residuals.len(),
            residual: *s.residuals.last().unwrap_or(&0.0),
            measured_ratio: s.measured_ratio,
            lambda: s.constants.lambda,
        }
    }
}
