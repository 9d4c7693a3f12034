//! The offset map `𝒢` of the modified data and its fixed point `b̃_sc`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::potentials::ForceField;
use crate::vecops::{dist, norm, sub, Samples};

use super::bounds::g_lipschitz_bound;
use super::flow::{full_integral, moments, outgoing, sample};
use super::operator::IncomingSolve;
use super::{offset_ball_radius, Flavor, ScatterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedFixedPoint {
    pub b_tilde_sc: Vec<f64>,
    /// Largest observed `|𝒢(h) - 𝒢(h')| / |h - h'|` along the iteration.
    pub g_contraction_measured: f64,
    /// Closed-form Lipschitz bound of `𝒢`.
    pub g_contraction_bound: f64,
    pub ball_radius: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// `h ↦ l̃ - ∫_0^∞ τ (F^l(x(τ)) - F^l(z₊(ã, x₋ + h, τ))) dτ` for a
/// converged modified incoming solve.
#[derive(Debug, Clone)]
pub struct ModifiedMap {
    field: ForceField,
    grid: Arc<TimeGrid>,
    cfg: ScatterConfig,
    v: Vec<f64>,
    x: Vec<f64>,
    a_tilde: Vec<f64>,
    l_tilde: Vec<f64>,
    fl_x: Samples,
}

impl ModifiedMap {
    pub fn new(solve: &IncomingSolve) -> Result<Self> {
        let op = &solve.operator;
        let field = op.field();
        let alpha = field.profile().alpha;
        let grid = op.grid();
        let x = solve.positions();
        let fl = sample(field.long().as_ref(), &x);
        let fs = sample(field.short().as_ref(), &x);
        let (impulse, _) = full_integral(grid, &fl.add(&fs), alpha);
        let a: Vec<f64> = op
            .v_minus()
            .iter()
            .zip(&impulse)
            .map(|(p, q)| p + q)
            .collect();
        let (past, _, _) = moments(grid, &fl.add(&fs).sub(&op.flow().reference_force), alpha);
        let (_, fut, _) = moments(grid, &fs, alpha);
        Self::from_parts(solve, &fl, a, sub(&past, &fut))
    }

    pub(crate) fn from_parts(
        solve: &IncomingSolve,
        fl_x: &Samples,
        a_tilde: Vec<f64>,
        l_tilde: Vec<f64>,
    ) -> Result<Self> {
        let op = &solve.operator;
        if op.flavor() != Flavor::Modified {
            return Err(Error::Usage(
                "the offset map needs a modified-flavor solve".into(),
            ));
        }
        let bc = &solve.constants;
        if bc.modified_smallness > 1.0 {
            return Err(Error::infeasible(
                "modified smallness 20 n max(b1l,b2)/(alpha q^2 (1/2+|x|/2^(3/2)-r)^alpha) <= 1",
                bc.modified_smallness,
                1.0,
            )
            .with_hint("increase |v|"));
        }
        Ok(ModifiedMap {
            field: op.field().clone(),
            grid: op.grid().clone(),
            cfg: *op.config(),
            v: op.v_minus().to_vec(),
            x: op.x_minus().to_vec(),
            a_tilde,
            l_tilde,
            fl_x: fl_x.clone(),
        })
    }

    pub fn a_tilde(&self) -> &[f64] {
        &self.a_tilde
    }

    pub fn l_tilde(&self) -> &[f64] {
        &self.l_tilde
    }

    pub fn ball_radius(&self) -> f64 {
        offset_ball_radius(norm(&self.x))
    }

    /// `z₊(ã, x₋ + h, ·)` on the scattering grid.
    pub fn outgoing_flow(&self, h: &[f64]) -> Result<Samples> {
        outgoing(
            &self.field,
            &self.grid,
            Flavor::Modified,
            &self.a_tilde,
            &self.v,
            &self.x,
            h,
            &self.cfg,
        )
    }

    pub fn eval(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.x.len() {
            return Err(Error::Domain("offset has the wrong dimension".into()));
        }
        if !self.field.has_long() {
            return Ok(self.l_tilde.clone());
        }
        let z = self.outgoing_flow(h)?;
        let g = self.fl_x.sub(&sample(self.field.long().as_ref(), &z));
        let (_, fut, _) = moments(&self.grid, &g, self.field.profile().alpha);
        Ok(sub(&self.l_tilde, &fut))
    }

    /// Fixed-point iteration from `h = 0`.
    pub fn fixed_point(&self) -> Result<ModifiedFixedPoint> {
        let radius = self.ball_radius();
        let bound = g_lipschitz_bound(self.field.profile(), norm(&self.x), norm(&self.v));
        let mut h = vec![0.0; self.x.len()];
        let mut g = self.eval(&h)?;
        let mut residuals = vec![dist(&g, &h)];
        let mut measured: f64 = 0.0;
        let mut iterations = 1;
        if self.field.has_long() {
            loop {
                if iterations >= self.cfg.max_iter {
                    return Err(Error::Convergence {
                        what: "offset fixed point".into(),
                        iterations,
                        last: *residuals.last().unwrap(),
                        residuals,
                    });
                }
                let next_h = g.clone();
                let next_g = self.eval(&next_h)?;
                iterations += 1;
                let dh = dist(&next_h, &h);
                let dg = dist(&next_g, &g);
                if dh > 1e-10 * (1.0 + norm(&h)) {
                    measured = measured.max(dg / dh);
                }
                h = next_h;
                g = next_g;
                let res = dist(&g, &h);
                residuals.push(res);
                if res <= self.cfg.offset_tol * (1.0 + norm(&h)) {
                    break;
                }
            }
        }
        let b = g;
        if norm(&b) > radius * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!(
                "offset fixed point |b| = {:.6e} escapes the ball of radius {radius:.6e}",
                norm(&b)
            )));
        }
        Ok(ModifiedFixedPoint {
            b_tilde_sc: b,
            g_contraction_measured: measured,
            g_contraction_bound: bound,
            ball_radius: radius,
            iterations,
            residuals,
        })
    }
}

/// The offset fixed point `b̃_sc` for a modified incoming solve.
pub fn solve_b_tilde(solve: &IncomingSolve) -> Result<ModifiedFixedPoint> {
    ModifiedMap::new(solve)?.fixed_point()
}
