//! Scattering data `(a, b)` with their breakdown, correction vectors and
//! the explicit estimate suite.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_dynamics::{check_admissible, free_orbit, iterate_order, Sign, Stop};
use crate::grid::TimeGrid;
use crate::potentials::ForceField;
use crate::vecops::{dist, norm, sub, Samples};

use super::bounds::{BoundConstants, ModifiedEstimates, StandardEstimates};
use super::flow::{
    double_to_future, full_integral, half_integrals, moments, outgoing, sample, scattering_grid,
    shifted,
};
use super::modified::{ModifiedFixedPoint, ModifiedMap};
use super::operator::{IncomingSolve, IncomingSummary, ScatteringOperator};
use super::{Flavor, ScatterConfig};

/// One inequality of the estimate suite, checked at its worst node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl EstimateCheck {
    fn scalar(name: &str, lhs: f64, rhs: f64) -> Self {
        EstimateCheck {
            name: name.to_string(),
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    /// Worst `lhs/rhs` over the given `(lhs, rhs)` pairs.
    fn nodewise(name: &str, pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut worst = (0.0, 1.0, 0.0f64);
        for (l, r) in pairs {
            let q = if l == 0.0 { 0.0 } else { l / r };
            if q >= worst.2 {
                worst = (l, r, q);
            }
        }
        Self::scalar(name, worst.0, worst.1)
    }
}

/// A correction vector with a quadrature error bar from grid refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionVector {
    pub value: Vec<f64>,
    pub error_bar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringDatum {
    pub flavor: Flavor,
    pub v_minus: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_sc: Vec<f64>,
    pub b_sc: Vec<f64>,
    /// `l` (standard, iterate) or `l̃` (modified).
    pub l: Vec<f64>,
    pub l1: Option<Vec<f64>>,
    pub l2: Option<Vec<f64>>,
    /// `W`, `W_N` or `W̃` according to the flavor.
    pub w: Vec<f64>,
    /// `sup_{t≥0} |y₊(t)|`.
    pub y_plus_sup: f64,
    #[serde(skip)]
    pub y_plus_times: Vec<f64>,
    #[serde(skip)]
    pub y_plus: Option<Samples>,
    /// `||a| - |v₋|| / |v₋|`.
    pub energy_error: f64,
    /// `|x(0) - b - y₊(0)|`.
    pub closure_residual: f64,
    /// `|b_sc - (l + l₁ + l₂)|` (standard, iterate).
    pub decomposition_residual: f64,
    /// False when the smallness condition behind the outgoing estimates
    /// fails; the data are still computed.
    pub guaranteed_regime: bool,
    pub constants: BoundConstants,
    pub incoming: IncomingSummary,
    pub estimates: Vec<EstimateCheck>,
    pub tail_bound: f64,
    pub offset: Option<ModifiedFixedPoint>,
}

impl ScatteringDatum {
    pub fn estimates_pass(&self) -> bool {
        self.estimates.iter().all(|e| e.pass)
    }
}

/// Solves for `y₋` and assembles the scattering data.
pub fn scatter(
    field: &ForceField,
    v_minus: &[f64],
    x_minus: &[f64],
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<ScatteringDatum> {
    let solve = ScatteringOperator::new(field, v_minus, x_minus, flavor, cfg)?.solve(None)?;
    assemble_scattering_data(&solve)
}

/// `a - v₋` only, skipping every outgoing computation.
pub fn velocity_deflection(
    field: &ForceField,
    v_minus: &[f64],
    x_minus: &[f64],
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<Vec<f64>> {
    let solve = ScatteringOperator::new(field, v_minus, x_minus, flavor, cfg)?.solve(None)?;
    let x = solve.positions();
    let grid = solve.operator.grid();
    let (impulse, _) = full_integral(grid, &forces(field, &x), field.profile().alpha);
    Ok(impulse)
}

fn forces(field: &ForceField, x: &Samples) -> Samples {
    let mut out = Samples::zeros(x.len(), x.dim);
    for (row, o) in x.rows().zip(out.data.chunks_exact_mut(x.dim)) {
        field.force(row, o);
    }
    out
}

fn add3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| x + y + z)
        .collect()
}

/// Assembles `(a, b)`, the breakdown, `y₊`, the correction vector and the
/// estimate suite from a converged incoming solve.
pub fn assemble_scattering_data(solve: &IncomingSolve) -> Result<ScatteringDatum> {
    let op = &solve.operator;
    let field = op.field();
    let cfg = op.config();
    let flow = op.flow();
    let grid = op.grid();
    let alpha = field.profile().alpha;
    let v = op.v_minus().to_vec();
    let xm = op.x_minus().to_vec();
    let dim = v.len();
    let zero = vec![0.0; dim];

    let x = solve.positions();
    let fl = sample(field.long().as_ref(), &x);
    let fs = sample(field.short().as_ref(), &x);
    let f_total = fl.add(&fs);
    let (impulse, tail_a) = full_integral(grid, &f_total, alpha);
    let a: Vec<f64> = v.iter().zip(&impulse).map(|(p, q)| p + q).collect();
    let a_sc = impulse.clone();
    let speed = norm(&v);
    let energy_error = (norm(&a) - speed).abs() / speed;

    // l (resp. l̃) is common to all flavors
    let g_past = fl.add(&fs).sub(&flow.reference_force);
    let (y0, _, tail_p) = moments(grid, &g_past, alpha);
    let (_, fs_future, tail_s) = moments(grid, &fs, alpha);
    let l = sub(&y0, &fs_future);
    let x0 = x.row(grid.zero_index()).to_vec();

    let (b_sc, l1, l2, zr, offset) = match op.flavor() {
        Flavor::Standard | Flavor::IterateN => {
            let zr = outgoing(field, grid, op.flavor(), &a, &a, &zero, &zero, cfg)?;
            let zr_x = shifted(&zr, &xm);
            let f_zr = sample(field.long().as_ref(), &zr);
            let f_zr_x = sample(field.long().as_ref(), &zr_x);
            let (_, m1, _) = moments(grid, &f_zr_x.sub(&f_zr), alpha);
            let (_, m2, _) = moments(grid, &fl.sub(&f_zr_x), alpha);
            let l1: Vec<f64> = m1.iter().map(|c| -c).collect();
            let l2: Vec<f64> = m2.iter().map(|c| -c).collect();
            (add3(&l, &l1, &l2), Some(l1), Some(l2), zr, None)
        }
        Flavor::Modified => {
            let map = ModifiedMap::from_parts(solve, &fl, a.clone(), l.clone())?;
            let fp = map.fixed_point()?;
            let zr = map.outgoing_flow(&fp.b_tilde_sc)?;
            (fp.b_tilde_sc.clone(), None, None, zr, Some(fp))
        }
    };
    let b: Vec<f64> = xm.iter().zip(&b_sc).map(|(p, q)| p + q).collect();

    // y₊(t) = ∫_t^∞∫_σ^∞ (F(x) - F^l(z_ref))
    let f_zr = sample(field.long().as_ref(), &zr);
    let (y_plus_all, tail_y) = double_to_future(grid, &f_total.sub(&f_zr), alpha);
    let z0 = grid.zero_index();
    let y_plus_times = grid.nodes()[z0..].to_vec();
    let y_plus = Samples {
        dim,
        data: y_plus_all.data[z0 * dim..].to_vec(),
    };
    let y_plus_sup = y_plus.max_norm();
    let closure_residual = dist(&sub(&x0, &b), y_plus.row(0));
    let decomposition_residual = match (&l1, &l2) {
        (Some(l1), Some(l2)) => dist(&sub(&b, &xm), &add3(&l, l1, l2)),
        _ => 0.0,
    };

    let w = correction_on_grid(field, grid, op.flavor(), &v, &xm, &a, cfg)?;

    let bc = solve.constants;
    let guaranteed_regime = match op.flavor() {
        Flavor::Modified => bc.modified_smallness <= 1.0,
        _ => bc.breakdown_smallness <= 1.0,
    };
    if !guaranteed_regime {
        warn!(
            "{} data at |v| = {speed:.4e}: outside guaranteed regime (smallness {:.3e} > 1)",
            op.flavor().name(),
            bc.breakdown_smallness
        );
    }

    let mut datum = ScatteringDatum {
        flavor: op.flavor(),
        v_minus: v.clone(),
        x_minus: xm.clone(),
        a,
        b,
        a_sc,
        b_sc,
        l,
        l1,
        l2,
        w,
        y_plus_sup,
        y_plus_times,
        y_plus: Some(y_plus),
        energy_error,
        closure_residual,
        decomposition_residual,
        guaranteed_regime,
        constants: bc,
        incoming: IncomingSummary::from(solve),
        estimates: Vec::new(),
        tail_bound: tail_a + tail_p + tail_s + tail_y + solve.tail_bound,
        offset,
    };
    datum.estimates = match op.flavor() {
        Flavor::Standard => standard_estimates(solve, &datum),
        Flavor::Modified => modified_estimates(solve, &datum),
        Flavor::IterateN => Vec::new(),
    };
    Ok(datum)
}

fn standard_estimates(solve: &IncomingSolve, d: &ScatteringDatum) -> Vec<EstimateCheck> {
    let op = &solve.operator;
    let field = op.field();
    let flow = op.flow();
    let grid = op.grid();
    let alpha = field.profile().alpha;
    let t = grid.nodes();
    let est = StandardEstimates::new(
        field.profile(),
        norm(&d.x_minus),
        norm(&d.v_minus),
        solve.r(),
    );
    let y = solve.y_minus.values();
    let yd = &solve.y_velocity;
    let past = 0..=grid.zero_index();
    let mut out = vec![
        EstimateCheck::nodewise(
            "incoming velocity |y'(t)|, t <= 0",
            past.clone()
                .map(|i| (norm(yd.row(i)), est.incoming_velocity(t[i]))),
        ),
        EstimateCheck::nodewise(
            "incoming deviation |y(t)|, t <= 0",
            past.map(|i| (norm(y.row(i)), est.incoming_deviation(t[i]))),
        ),
        EstimateCheck::scalar(
            "velocity deflection |a_sc|",
            norm(&d.a_sc),
            est.velocity_deflection(),
        ),
        EstimateCheck::scalar("shift |l|", norm(&d.l), est.shift_l()),
    ];
    // linearizations about y₋ = 0
    let p = &flow.position;
    let fl_p = sample(field.long().as_ref(), p);
    let fs_p = sample(field.short().as_ref(), p);
    let (imp0, _) = full_integral(grid, &fl_p.add(&fs_p), alpha);
    out.push(EstimateCheck::scalar(
        "velocity linearization |a_sc - int F(z_- + x_-)|",
        dist(&d.a_sc, &imp0),
        est.velocity_linearization(),
    ));
    let (past0, _, _) = moments(grid, &fl_p.add(&fs_p).sub(&flow.reference_force), alpha);
    let (_, fut0, _) = moments(grid, &fs_p, alpha);
    let l0 = sub(&past0, &fut0);
    out.push(EstimateCheck::scalar(
        "shift linearization |l(y) - l(0)|",
        dist(&d.l, &l0),
        est.shift_linearization(),
    ));
    if d.guaranteed_regime {
        if let (Some(l1), Some(l2)) = (&d.l1, &d.l2) {
            out.push(EstimateCheck::scalar(
                "breakdown |l1|",
                norm(l1),
                est.shift_l1(),
            ));
            out.push(EstimateCheck::scalar(
                "breakdown |l2|",
                norm(l2),
                est.shift_l2(),
            ));
        }
        if let Some(yp) = &d.y_plus {
            out.push(EstimateCheck::nodewise(
                "outgoing deviation |y+(t)|, t >= 0",
                d.y_plus_times
                    .iter()
                    .enumerate()
                    .map(|(i, &ti)| (norm(yp.row(i)), est.outgoing_deviation(ti))),
            ));
        }
    }
    out
}

fn modified_estimates(solve: &IncomingSolve, d: &ScatteringDatum) -> Vec<EstimateCheck> {
    let op = &solve.operator;
    let field = op.field();
    let flow = op.flow();
    let grid = op.grid();
    let alpha = field.profile().alpha;
    let t = grid.nodes();
    let est = ModifiedEstimates::new(
        field.profile(),
        norm(&d.x_minus),
        norm(&d.v_minus),
        solve.r(),
    );
    let y = solve.y_minus.values();
    let yd = &solve.y_velocity;
    let past = 0..=grid.zero_index();
    let mut out = vec![
        EstimateCheck::nodewise(
            "incoming velocity |y'(t)|, t <= 0",
            past.clone()
                .map(|i| (norm(yd.row(i)), est.incoming_velocity(t[i]))),
        ),
        EstimateCheck::nodewise(
            "incoming deviation |y(t)|, t <= 0",
            past.map(|i| (norm(y.row(i)), est.incoming_deviation(t[i]))),
        ),
        EstimateCheck::scalar(
            "velocity deflection |a_sc|",
            norm(&d.a_sc),
            est.velocity_deflection(),
        ),
        EstimateCheck::scalar("offset |b_sc|", norm(&d.b_sc), est.position_deflection()),
    ];
    if let Some(yp) = &d.y_plus {
        out.push(EstimateCheck::nodewise(
            "outgoing deviation |y+(t)|, t >= 0",
            d.y_plus_times
                .iter()
                .enumerate()
                .map(|(i, &ti)| (norm(yp.row(i)), est.outgoing_deviation(ti))),
        ));
    }
    let fs_p = sample(field.short().as_ref(), &flow.position);
    let (imp_s, _) = full_integral(grid, &fs_p, alpha);
    let lin: Vec<f64> = d
        .a_sc
        .iter()
        .zip(&d.w)
        .zip(&imp_s)
        .map(|((a, w), s)| a - w - s)
        .collect();
    out.push(EstimateCheck::scalar(
        "velocity linearization |a_sc - W - int F^s(z_-)|",
        norm(&lin),
        est.velocity_linearization(),
    ));
    let (past0, fut0, _) = moments(grid, &fs_p, alpha);
    let l0 = sub(&past0, &fut0);
    out.push(EstimateCheck::scalar(
        "offset linearization |b_sc - l(0)|",
        dist(&d.b_sc, &l0),
        est.position_linearization(),
    ));
    out
}

/// `W` (standard), `W_N` (iterate) or `W̃` (modified) on a given grid. Only
/// `F^l`, `v₋`, `x₋` and the outgoing velocity `a` enter.
fn correction_on_grid(
    field: &ForceField,
    grid: &TimeGrid,
    flavor: Flavor,
    v: &[f64],
    x: &[f64],
    a: &[f64],
    cfg: &ScatterConfig,
) -> Result<Vec<f64>> {
    let profile = field.profile();
    let alpha = profile.alpha;
    let long = field.long().as_ref();
    let dim = v.len();
    let zero = vec![0.0; dim];
    if long.is_zero() {
        return Ok(zero);
    }
    let converge = Stop::Converge {
        tol: cfg.free_tol,
        max_iter: cfg.free_max_iter,
    };
    match flavor {
        Flavor::Standard | Flavor::IterateN => {
            check_admissible(profile, v, &zero, v, &zero)?;
            let q = match flavor {
                Flavor::IterateN => {
                    let (n, _) = iterate_order(alpha);
                    let mut z = free_orbit(
                        long,
                        alpha,
                        grid,
                        Sign::Minus,
                        v,
                        &zero,
                        Stop::Steps(n),
                        true,
                    )?;
                    z.iterates.pop().expect("iterates are kept")
                }
                _ => {
                    free_orbit(long, alpha, grid, Sign::Minus, v, &zero, converge, false)?.position
                }
            };
            let gq = sample(long, &shifted(&q, x)).sub(&sample(long, &q));
            let (past, _, _) = moments(grid, &gq, alpha);
            let zr = outgoing(field, grid, flavor, a, a, &zero, &zero, cfg)?;
            let gz = sample(long, &shifted(&zr, x)).sub(&sample(long, &zr));
            let (_, future, _) = moments(grid, &gz, alpha);
            Ok(sub(&past, &future))
        }
        Flavor::Modified => {
            check_admissible(profile, v, x, v, &zero)?;
            let zm = free_orbit(long, alpha, grid, Sign::Minus, v, x, converge, false)?.position;
            let (past, _, _) = half_integrals(grid, &sample(long, &zm), alpha);
            let zp = outgoing(field, grid, flavor, a, v, x, &zero, cfg)?;
            let (_, future, _) = half_integrals(grid, &sample(long, &zp), alpha);
            Ok(past.iter().zip(&future).map(|(p, f)| p + f).collect())
        }
    }
}

/// Recomputes the correction vector of a datum from `F^l` and the datum
/// alone, with an error bar from one grid refinement.
pub fn compute_w(
    field: &ForceField,
    datum: &ScatteringDatum,
    cfg: &ScatterConfig,
) -> Result<CorrectionVector> {
    let alpha = field.profile().alpha;
    let speed = norm(&datum.v_minus);
    if !(speed > 0.0) {
        return Err(Error::Domain("datum has zero incoming velocity".into()));
    }
    let coarse_grid: Arc<TimeGrid> = scattering_grid(cfg, alpha, speed);
    let coarse = correction_on_grid(
        field,
        &coarse_grid,
        datum.flavor,
        &datum.v_minus,
        &datum.x_minus,
        &datum.a,
        cfg,
    )?;
    let fine_cfg = cfg.refined();
    let fine_grid = scattering_grid(&fine_cfg, alpha, speed);
    let fine = correction_on_grid(
        field,
        &fine_grid,
        datum.flavor,
        &datum.v_minus,
        &datum.x_minus,
        &datum.a,
        &fine_cfg,
    )?;
    Ok(CorrectionVector {
        error_bar: dist(&fine, &coarse),
        value: fine,
    })
}
