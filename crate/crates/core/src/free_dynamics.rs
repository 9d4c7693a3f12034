//! Long-range free flows `z_±(w, x+h, ·)`, solutions of `z̈ = F^l(z)` with
//! `z(0) = x + h` and asymptotic velocity `w` as `t → ±∞`.
//!
//! Writing `z(t) = x + h + tw + f(t)`, the deviation `f` is the fixed point of
//!
//! ```text
//! G₊f(t) = -∫_0^t ∫_σ^∞  F^l(x + h + τw + f(τ)) dτ dσ
//! G₋f(t) =  ∫_0^t ∫_-∞^σ F^l(x + h + τw + f(τ)) dτ dσ
//! ```
//!
//! in the space of continuous `f` with `sup |f(t)/t| < ∞`. Under the
//! admissibility conditions checked by [`check_admissible`] the map is a
//! contraction with ratio at most 1/2, so plain Picard iteration converges.
//! The first few Picard iterates, started from `f = 0`, are the explicit
//! approximations `z_{±,m}` returned by [`free_iterates`].

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, TimeGrid};
use crate::potentials::{DecayProfile, ForceField, Potential};
use crate::trajectory::{Diagnostics, Trajectory};
use crate::vecops::{dist, dot, norm, Samples};

/// Time direction in which the free flow has the prescribed velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Exact fixed point, or the explicit iterate `z_{±,N+1}` with `N = ⌊1/α⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ExactFixedPoint,
    IterateN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeFlowConfig {
    pub sign: Sign,
    pub grid: GridSpec,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub backend: Backend,
}

impl Default for FreeFlowConfig {
    fn default() -> Self {
        FreeFlowConfig {
            sign: Sign::Plus,
            grid: GridSpec::default(),
            picard_tol: 1e-10,
            max_iter: 200,
            backend: Backend::ExactFixedPoint,
        }
    }
}

impl FreeFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::Domain("picard_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        if !(self.grid.panel_width > 0.0 && self.grid.growth > 0.0 && self.grid.points >= 3) {
            return Err(Error::Domain(
                "grid needs positive panel width and growth, points >= 3".into(),
            ));
        }
        Ok(())
    }
}

/// Quantities derived from a successful admissibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `C'`, the slope in `|z - x - h - tw| ≤ C'|t|`.
    pub c_prime: f64,
    /// `1 + |x|/√2 - |h|`.
    pub margin: f64,
    /// Left side of the smallness condition (must be ≤ 1).
    pub smallness: f64,
}

/// Checks `|w - v| ≤ |v|/(4√2)`, `|h| < 1 + |x|/√2` and
/// `2⁵ n max(β₁ˡ, β₂ˡ) / (α |v|² (1 + |x|/√2 - |h|)^α) ≤ 1`, with `v·x = 0`.
pub fn check_admissible(
    profile: &DecayProfile,
    v: &[f64],
    x: &[f64],
    w: &[f64],
    h: &[f64],
) -> Result<Admissibility> {
    let n = profile.dim;
    if [v, x, w, h].iter().any(|a| a.len() != n) {
        return Err(Error::Domain(format!(
            "free-flow vectors must have {n} components"
        )));
    }
    let sv = norm(v);
    let sx = norm(x);
    if !(sv > 0.0) || !sv.is_finite() {
        return Err(Error::Domain(
            "reference velocity must be nonzero and finite".into(),
        ));
    }
    if dot(v, x).abs() > 1e-12 * sv * sx.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(
            "reference point must be orthogonal to the reference velocity".into(),
        ));
    }
    let dw = dist(w, v);
    if dw > sv / (4.0 * SQRT_2) {
        return Err(Error::infeasible(
            "velocity mismatch |w-v| <= |v|/(4 sqrt2)",
            dw,
            sv / (4.0 * SQRT_2),
        ));
    }
    let margin = 1.0 + sx / SQRT_2 - norm(h);
    if !(margin > 0.0) {
        return Err(Error::infeasible(
            "offset |h| < 1+|x|/sqrt2",
            norm(h),
            1.0 + sx / SQRT_2,
        ));
    }
    let a = profile.alpha;
    let b = profile.beta1_l().max(profile.beta2_l());
    let smallness = 32.0 * profile.n() * b / (a * sv * sv * margin.powf(a));
    if smallness > 1.0 {
        let mu = (32.0 * profile.n() * b / (a * margin.powf(a))).sqrt();
        return Err(Error::infeasible(
            "free-flow smallness 32 n max(b1l,b2l)/(alpha |v|^2 (1+|x|/sqrt2-|h|)^alpha) <= 1",
            smallness,
            1.0,
        )
        .with_hint(format!("needs |v| >= {mu:.6e}")));
    }
    let c_prime = 4.0 * SQRT_2 * profile.n().sqrt() * profile.beta1_l() / (a * sv * margin.powf(a));
    Ok(Admissibility {
        c_prime,
        margin,
        smallness,
    })
}

/// `N = ⌊1/α⌋`, after moving `α = 1/m` down by 1e-12.
pub fn iterate_order(alpha: f64) -> (usize, f64) {
    let inv = 1.0 / alpha;
    let m = inv.round();
    if (inv - m).abs() < 1e-9 {
        let moved = alpha - 1e-12;
        warn!("alpha = 1/{m} is moved to {moved:.15} for the iterate construction");
        ((1.0 / moved).floor() as usize, moved)
    } else {
        (inv.floor() as usize, alpha)
    }
}

/// Picard stopping rule for [`free_orbit`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stop {
    /// Iterate until the residual drops below `tol` (or stagnates at
    /// round-off level), failing after `max_iter` steps.
    Converge { tol: f64, max_iter: usize },
    /// Perform exactly this many Picard steps.
    Steps(usize),
}

/// A free flow sampled on a [`TimeGrid`].
#[derive(Debug, Clone)]
pub(crate) struct FreeOrbit {
    pub position: Samples,
    pub velocity: Samples,
    pub residuals: Vec<f64>,
    pub tail: f64,
    /// Every Picard iterate `z_0, z_1, …` when requested.
    pub iterates: Vec<Samples>,
}

/// `sup_{t≠0} |g(t)/t|` over grid nodes.
pub(crate) fn v_norm(grid: &TimeGrid, g: &Samples) -> f64 {
    grid.nodes()
        .iter()
        .zip(g.rows())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, r)| norm(r) / t.abs())
        .fold(0.0, f64::max)
}

/// One application of `G_±` to the deviation `f`. Returns `(G f, ż)` and
/// the size of the tail correction beyond the truncated grid.
fn apply_g(
    long: &dyn Potential,
    alpha: f64,
    grid: &TimeGrid,
    sign: Sign,
    w: &[f64],
    base: &[f64],
    f: &Samples,
) -> (Samples, Samples, f64) {
    let dim = w.len();
    let t = grid.nodes();
    let mut point = vec![0.0; dim];
    let force = Samples::from_fn(grid.len(), dim, |i, out| {
        for k in 0..dim {
            point[k] = base[k] + t[i] * w[k] + f.data[i * dim + k];
        }
        long.force(&point, out);
    });
    // beyond the grid the force decays like |t|^-(α+1)
    let (mut inner, edge) = match sign {
        Sign::Plus => (grid.cumulative_right(&force), force.len() - 1),
        Sign::Minus => (grid.cumulative_left(&force), 0),
    };
    let reach = t[edge].abs();
    let tail: Vec<f64> = force.row(edge).iter().map(|x| x * reach / alpha).collect();
    for row in inner.data.chunks_exact_mut(dim) {
        for (r, c) in row.iter_mut().zip(&tail) {
            *r += c;
        }
    }
    let outer = grid.cumulative_from_zero(&inner);
    let s = -sign.factor();
    let gf = outer.scaled(s);
    let velocity = Samples::from_fn(grid.len(), dim, |i, out| {
        for k in 0..dim {
            out[k] = w[k] + s * inner.data[i * dim + k];
        }
    });
    (gf, velocity, norm(&tail))
}

pub(crate) fn free_orbit(
    long: &dyn Potential,
    alpha: f64,
    grid: &TimeGrid,
    sign: Sign,
    w: &[f64],
    base: &[f64],
    stop: Stop,
    keep_iterates: bool,
) -> Result<FreeOrbit> {
    let dim = w.len();
    let t = grid.nodes();
    let line = |f: &Samples| {
        Samples::from_fn(grid.len(), dim, |i, out| {
            for k in 0..dim {
                out[k] = base[k] + t[i] * w[k] + f.data[i * dim + k];
            }
        })
    };
    let mut f = Samples::zeros(grid.len(), dim);
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(line(&f));
    }
    let mut residuals = Vec::new();
    let speed = norm(w);
    let (limit, tol) = match stop {
        Stop::Converge { tol, max_iter } => (max_iter, tol),
        Stop::Steps(k) => (k, 0.0),
    };
    let mut velocity = Samples::zeros(grid.len(), dim);
    let mut tail = 0.0;
    for _ in 0..limit {
        let (next, vel, tl) = apply_g(long, alpha, grid, sign, w, base, &f);
        let res = v_norm(grid, &next.sub(&f));
        residuals.push(res);
        f = next;
        velocity = vel;
        tail = tl;
        if keep_iterates {
            iterates.push(line(&f));
        }
        if let Stop::Converge { .. } = stop {
            let floor = 64.0 * f64::EPSILON * (speed + v_norm(grid, &f));
            if res <= tol || res <= floor {
                break;
            }
        }
    }
    if let Stop::Converge { max_iter, .. } = stop {
        let last = *residuals.last().unwrap_or(&f64::INFINITY);
        let floor = 64.0 * f64::EPSILON * (speed + v_norm(grid, &f));
        if last > tol && last > floor {
            return Err(Error::Convergence {
                what: "free-flow Picard iteration".into(),
                iterations: max_iter,
                last,
                residuals,
            });
        }
    }
    if limit == 0 {
        velocity = Samples::from_fn(grid.len(), dim, |_, out| out.copy_from_slice(w));
    }
    Ok(FreeOrbit {
        position: line(&f),
        velocity,
        residuals,
        tail,
        iterates,
    })
}

fn grid_for(cfg: &FreeFlowConfig, alpha: f64, speed: f64) -> TimeGrid {
    TimeGrid::symmetric(&cfg.grid, speed, cfg.grid.reach_for(alpha))
}

fn to_trajectory(grid: &TimeGrid, orbit: &FreeOrbit) -> Result<Trajectory> {
    let residual = orbit.residuals.last().copied().unwrap_or(0.0);
    Ok(Trajectory::new(
        grid.nodes().to_vec(),
        orbit.position.clone(),
        orbit.velocity.clone(),
    )?
    .with_diagnostics(Diagnostics {
        iterations: orbit.residuals.len(),
        residual,
        residuals: orbit.residuals.clone(),
        tail_bound: orbit.tail,
    }))
}

/// Computes `z_±(w, x+h, ·)` with reference velocity `v = w`.
pub fn solve_free(
    field: &ForceField,
    w: &[f64],
    x: &[f64],
    h: &[f64],
    cfg: &FreeFlowConfig,
) -> Result<Trajectory> {
    solve_free_with_reference(field, w, x, h, w, cfg)
}

/// Computes `z_±(w, x+h, ·)` for an explicit reference velocity `v`
/// (`v·x = 0`), which only enters the admissibility conditions.
pub fn solve_free_with_reference(
    field: &ForceField,
    w: &[f64],
    x: &[f64],
    h: &[f64],
    v: &[f64],
    cfg: &FreeFlowConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let profile = field.profile();
    let adm = check_admissible(profile, v, x, w, h)?;
    let grid = grid_for(cfg, profile.alpha, norm(w).max(f64::MIN_POSITIVE));
    let base: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
    let orbit = match cfg.backend {
        Backend::ExactFixedPoint => free_orbit(
            field.long().as_ref(),
            profile.alpha,
            &grid,
            cfg.sign,
            w,
            &base,
            Stop::Converge {
                tol: cfg.picard_tol,
                max_iter: cfg.max_iter,
            },
            false,
        )?,
        Backend::IterateN => {
            let (n, _) = iterate_order(profile.alpha);
            free_orbit(
                field.long().as_ref(),
                profile.alpha,
                &grid,
                cfg.sign,
                w,
                &base,
                Stop::Steps(n + 1),
                false,
            )?
        }
    };
    let traj = to_trajectory(&grid, &orbit)?;
    let worst = deviation_ratio(&traj, &base, w, adm.c_prime);
    if worst > 1.0 + 1e-9 {
        return Err(Error::Invariant(format!(
            "free flow leaves the deviation cone: ratio {worst:.6e}"
        )));
    }
    Ok(traj)
}

/// `max_t |z(t) - base - tw| / (C'|t|)` over nonzero nodes.
pub fn deviation_ratio(traj: &Trajectory, base: &[f64], w: &[f64], c_prime: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &t) in traj.times.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let d: f64 = traj
            .position(i)
            .iter()
            .zip(base)
            .zip(w)
            .map(|((z, b), wk)| (z - b - t * wk).powi(2))
            .sum::<f64>()
            .sqrt();
        // rounding of the straight line itself
        let d = (d - 8.0 * f64::EPSILON * (norm(base) + t.abs() * norm(w))).max(0.0);
        let bound = c_prime * t.abs();
        worst = worst.max(if bound > 0.0 {
            d / bound
        } else if d > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    worst
}

/// Observed-to-bound ratios of the iterate estimates (each must be ≤ 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateReport {
    /// `N = ⌊1/α⌋` (after the `α = 1/m` adjustment).
    pub order: usize,
    /// `|z_m - x - h - tw| ≤ C'|t|`, `m = 1..N+1`.
    pub deviation: f64,
    /// Growth-type bound on `|z_{m+1} - z_m|`, `m = 0..N-1`, `±t ≥ 0`.
    pub step_growth: f64,
    /// Uniform bound on `|z_{N+1} - z_N|`, `±t ≥ 0`.
    pub final_step: f64,
    /// Linear-in-`|t|` bound on `|z_{m+1} - z_m|`, `m = 1..N`.
    pub step_linear: f64,
    /// Closed-form value of the uniform bound.
    pub final_step_bound: f64,
    pub pass: bool,
}

/// Closed-form bounds for the explicit iterates, for a reference speed
/// `|v|`, `|x|` and `|h|`.
#[derive(Debug, Clone, Copy)]
pub struct IterateBounds {
    n: f64,
    alpha: f64,
    b1: f64,
    b2: f64,
    speed: f64,
    margin: f64,
}

impl IterateBounds {
    pub fn new(profile: &DecayProfile, alpha: f64, speed: f64, x_norm: f64, h_norm: f64) -> Self {
        IterateBounds {
            n: profile.n(),
            alpha,
            b1: profile.beta1_l(),
            b2: profile.beta2_l(),
            speed,
            margin: 1.0 + x_norm / SQRT_2 - h_norm,
        }
    }

    /// Bound on `|z_{m+1}(t) - z_m(t)|` for `m ≤ N-1` and `±t ≥ 0`.
    pub fn step_growth(&self, m: usize, t: f64) -> f64 {
        let (n, a, v, k) = (self.n, self.alpha, self.speed, self.margin);
        let mf = m as f64;
        let e = 1.0 - (mf + 1.0) * a;
        let prod: f64 = (1..=m + 1)
            .map(|j| (1.0 - j as f64 * a) * j as f64)
            .product();
        let pre = 2f64.powf(3.0 * (mf + 1.0)) * n.powf(mf + 0.5) * self.b2.powi(m as i32) * self.b1
            / (a.powf(mf + 1.0) * v.powf(2.0 * mf + 2.0) * prod);
        let grown = k + t.abs() * v / (2.0 * SQRT_2);
        // A^e - K^e without cancellation when e is tiny
        let diff = k.powf(e) * (e * (grown / k).ln()).exp_m1();
        pre * diff
    }

    /// Uniform bound on `|z_{N+1}(t) - z_N(t)|` for `±t ≥ 0`.
    pub fn final_step(&self, order: usize) -> f64 {
        let (n, a, v, k) = (self.n, self.alpha, self.speed, self.margin);
        let nf = order as f64;
        let prod: f64 = (1..=order + 1)
            .map(|j| j as f64 * (1.0 - j as f64 * a).abs())
            .product();
        2f64.powf(3.0 * (nf + 1.0)) * n.powf(nf + 0.5) * self.b2.powi(order as i32) * self.b1
            / (a.powf(nf + 1.0) * v.powf(2.0 * nf + 2.0) * prod * k.powf((nf + 1.0) * a - 1.0))
    }

    /// Bound on `|z_{m+1}(t) - z_m(t)|` for `1 ≤ m ≤ N`, all `t`.
    pub fn step_linear(&self, m: usize, t: f64) -> f64 {
        let (n, a, v, k) = (self.n, self.alpha, self.speed, self.margin);
        let mf = m as f64;
        2f64.powf(4.0 * mf + 2.5) * n.powf(mf + 0.5) * self.b2.powi(m as i32) * self.b1
            / (a.powf(mf + 1.0) * v.powf(2.0 * mf + 1.0) * k.powf((mf + 1.0) * a))
            * t.abs()
    }
}

/// The explicit iterates `z_{±,0}, …, z_{±,N+1}` on the configured grid
/// (reference velocity `v = w`), with every iterate estimate checked at
/// the nodes.
pub fn free_iterates(
    field: &ForceField,
    w: &[f64],
    x: &[f64],
    h: &[f64],
    order: Option<usize>,
    cfg: &FreeFlowConfig,
) -> Result<(Vec<Trajectory>, IterateReport)> {
    cfg.validate()?;
    let profile = field.profile();
    let adm = check_admissible(profile, w, x, w, h)?;
    let (natural, alpha) = iterate_order(profile.alpha);
    let order = order.unwrap_or(natural);
    let grid = Arc::new(grid_for(cfg, profile.alpha, norm(w)));
    let base: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
    let orbit = free_orbit(
        field.long().as_ref(),
        profile.alpha,
        &grid,
        cfg.sign,
        w,
        &base,
        Stop::Steps(order + 1),
        true,
    )?;
    let bounds = IterateBounds::new(profile, alpha, norm(w), norm(x), norm(h));
    let t = grid.nodes();
    let forward = |i: usize| match cfg.sign {
        Sign::Plus => t[i] >= 0.0,
        Sign::Minus => t[i] <= 0.0,
    };
    let ratio = |d: f64, b: f64| if d <= 1e-15 * (1.0 + b) { 0.0 } else { d / b };
    let mut report = IterateReport {
        order,
        deviation: 0.0,
        step_growth: 0.0,
        final_step: 0.0,
        step_linear: 0.0,
        final_step_bound: bounds.final_step(order),
        pass: true,
    };
    let its = &orbit.iterates;
    for i in 0..grid.len() {
        for m in 1..=order + 1 {
            let dev = dist(its[m].row(i), its[0].row(i));
            report.deviation = report.deviation.max(ratio(dev, adm.c_prime * t[i].abs()));
        }
        for m in 0..order {
            let d = dist(its[m + 1].row(i), its[m].row(i));
            if forward(i) {
                report.step_growth = report
                    .step_growth
                    .max(ratio(d, bounds.step_growth(m, t[i])));
            }
            if m >= 1 {
                report.step_linear = report
                    .step_linear
                    .max(ratio(d, bounds.step_linear(m, t[i])));
            }
        }
        let d = dist(its[order + 1].row(i), its[order].row(i));
        if order >= 1 {
            report.step_linear = report
                .step_linear
                .max(ratio(d, bounds.step_linear(order, t[i])));
        }
        if forward(i) {
            report.final_step = report.final_step.max(ratio(d, report.final_step_bound));
        }
    }
    report.pass = [
        report.deviation,
        report.step_growth,
        report.final_step,
        report.step_linear,
    ]
    .iter()
    .all(|r| *r <= 1.0);
    let dim = w.len();
    let mut out = Vec::with_capacity(its.len());
    for (m, z) in its.iter().enumerate() {
        // velocity of z_m follows from the force along z_{m-1}
        let velocity = if m == 0 {
            Samples::from_fn(grid.len(), dim, |_, o| o.copy_from_slice(w))
        } else {
            let prev = its[m - 1].sub(&line_samples(&grid, w, &base));
            apply_g(
                field.long().as_ref(),
                profile.alpha,
                &grid,
                cfg.sign,
                w,
                &base,
                &prev,
            )
            .1
        };
        out.push(Trajectory::new(t.to_vec(), z.clone(), velocity)?);
    }
    Ok((out, report))
}

fn line_samples(grid: &TimeGrid, w: &[f64], base: &[f64]) -> Samples {
    let t = grid.nodes();
    Samples::from_fn(grid.len(), w.len(), |i, o| {
        for k in 0..w.len() {
            o[k] = base[k] + t[i] * w[k];
        }
    })
}

/// Result of comparing a trajectory of the full equation with a free flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub sup_difference: f64,
    /// True when `|x - z|` keeps growing over the last 10% of the nodes.
    pub growth: bool,
}

/// `sup |x(t) - z(t)|` over the shared nodes, flagging growth over the tail.
pub fn check_boundedness_vs_free(
    x_traj: &Trajectory,
    z_traj: &Trajectory,
) -> Result<BoundednessReport> {
    if x_traj.times.len() != z_traj.times.len()
        || x_traj.dim() != z_traj.dim()
        || x_traj
            .times
            .iter()
            .zip(&z_traj.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::Usage(
            "trajectories must share their time grid".into(),
        ));
    }
    let diffs: Vec<f64> = (0..x_traj.len())
        .map(|i| dist(x_traj.position(i), z_traj.position(i)))
        .collect();
    let sup = diffs.iter().copied().fold(0.0, f64::max);
    let n = diffs.len();
    let window = (n / 10).max(3).min(n);
    let tail = &diffs[n - window..];
    let first = tail[0];
    let last = tail[window - 1];
    let rising = tail.windows(2).filter(|p| p[1] > p[0]).count();
    let growth = last > first + 1e-3 * (1.0 + first) && rising * 2 > window - 1;
    Ok(BoundednessReport {
        sup_difference: sup,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{demo_field, Family};
    use proptest::prelude::*;

    fn coulombish(strength: f64, alpha: f64) -> ForceField {
        ForceField::from_families(
            2,
            alpha,
            vec![Family::PowerLaw {
                strength,
                decay: alpha,
                radius: 1.0,
                center: None,
            }],
            vec![],
        )
        .unwrap()
    }

    fn cfg(sign: Sign) -> FreeFlowConfig {
        FreeFlowConfig {
            sign,
            picard_tol: 1e-14,
            ..FreeFlowConfig::default()
        }
    }

    #[test]
    fn zero_field_gives_straight_lines() {
        let field = ForceField::zero(2);
        let tr = solve_free(
            &field,
            &[3.0, 0.0],
            &[0.0, 1.0],
            &[0.1, 0.2],
            &cfg(Sign::Minus),
        )
        .unwrap();
        for (i, &t) in tr.times.iter().enumerate() {
            assert_eq!(tr.position(i), &[0.1 + 3.0 * t, 1.2][..]);
            assert_eq!(tr.velocity(i), &[3.0, 0.0][..]);
        }
    }

    #[test]
    fn reversal_identity() {
        let field = coulombish(1.0, 1.0);
        let w = [20.0, 1.0];
        let x = [-0.05, 1.0];
        let h = [0.2, -0.1];
        let plus = solve_free_with_reference(
            &field,
            &[-20.0, -1.0],
            &x,
            &h,
            &[-20.0, -1.0],
            &cfg(Sign::Plus),
        )
        .unwrap();
        let minus = solve_free(&field, &w, &x, &h, &cfg(Sign::Minus)).unwrap();
        let n = plus.len();
        for i in 0..n {
            let a = minus.position(i);
            let b = plus.position(n - 1 - i);
            assert!(dist(a, b) <= 1e-12 * (1.0 + norm(a)), "node {i}");
        }
    }

    #[test]
    fn inadmissible_parameters_name_the_condition() {
        let field = coulombish(1.0, 1.0);
        let err = solve_free(
            &field,
            &[1.0, 0.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &cfg(Sign::Plus),
        )
        .unwrap_err();
        match err {
            Error::Infeasible { condition, .. } => assert!(condition.contains("smallness")),
            other => panic!("unexpected {other:?}"),
        }
        let err = solve_free(
            &field,
            &[100.0, 0.0],
            &[0.0, 0.0],
            &[2.0, 0.0],
            &cfg(Sign::Plus),
        )
        .unwrap_err();
        assert!(err.is_infeasible());
        let err = solve_free_with_reference(
            &field,
            &[100.0, 30.0],
            &[0.0, 0.0],
            &[0.0, 0.0],
            &[100.0, 0.0],
            &cfg(Sign::Plus),
        )
        .unwrap_err();
        assert!(err.is_infeasible());
    }

    #[test]
    fn non_convergence_reports_history() {
        let field = coulombish(1.0, 1.0);
        let c = FreeFlowConfig {
            max_iter: 2,
            picard_tol: 1e-300,
            ..cfg(Sign::Plus)
        };
        match solve_free(&field, &[30.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &c).unwrap_err() {
            Error::Convergence { residuals, .. } => assert_eq!(residuals.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn picard_ratio_is_at_most_half_and_deviation_cone_holds() {
        let field = demo_field();
        let mu = crate::potentials::mu_threshold(field.profile()).unwrap();
        let w = [1.2 * mu, 0.0];
        let tr = solve_free(&field, &w, &[0.0, 0.5], &[0.0, 0.0], &cfg(Sign::Plus)).unwrap();
        let r = &tr.diagnostics.residuals;
        for k in 1..r.len() - 1 {
            if r[k] > 1e-13 {
                assert!(r[k + 1] <= 0.5 * r[k], "step {k}: {:?}", r);
            }
        }
    }

    #[test]
    fn velocity_tends_to_w_and_satisfies_newton() {
        let field = coulombish(1.0, 1.0);
        let w = [20.0, 0.0];
        let tr = solve_free(&field, &w, &[0.0, 0.5], &[0.0, 0.0], &cfg(Sign::Plus)).unwrap();
        let last = tr.velocity(tr.len() - 1);
        assert!(dist(last, &w) < 1e-12);
        let first = tr.velocity(0);
        assert!(dist(first, &w) > 1e-4);
        // finite-difference acceleration matches F^l near t = 0
        let (x0, _) = tr.state_at(0.01).unwrap();
        let (_, va) = tr.state_at(0.01 - 1e-5).unwrap();
        let (_, vb) = tr.state_at(0.01 + 1e-5).unwrap();
        let mut f = [0.0; 2];
        field.force_long(&x0, &mut f);
        for k in 0..2 {
            let acc = (vb[k] - va[k]) / 2e-5;
            assert!(
                (acc - f[k]).abs() < 1e-4 * (1.0 + f[k].abs()),
                "{acc} vs {}",
                f[k]
            );
        }
    }

    #[test]
    fn grid_refinement_changes_little() {
        let field = coulombish(1.0, 1.0);
        let w = [20.0, 0.0];
        let x = [0.0, 0.3];
        let coarse = solve_free(&field, &w, &x, &[0.0, 0.0], &cfg(Sign::Plus)).unwrap();
        let mut fine_cfg = cfg(Sign::Plus);
        fine_cfg.grid = fine_cfg.grid.refined();
        let fine = solve_free(&field, &w, &x, &[0.0, 0.0], &fine_cfg).unwrap();
        for &t in &[-1.0, -0.01, 0.003, 0.5, 100.0] {
            let a = coarse.state_at(t).unwrap().0;
            let b = fine.state_at(t).unwrap().0;
            assert!(dist(&a, &b) < 1e-9 * (1.0 + norm(&a)), "t = {t}");
        }
    }

    #[test]
    fn iterates_of_zero_field_are_lines() {
        let field = ForceField::zero(2);
        let (its, report) = free_iterates(
            &field,
            &[2.0, 0.0],
            &[0.0, 1.0],
            &[0.0, 0.0],
            None,
            &cfg(Sign::Plus),
        )
        .unwrap();
        assert_eq!(report.order, 1);
        assert_eq!(its.len(), 3);
        for z in &its[1..] {
            assert_eq!(z.positions, its[0].positions);
        }
    }

    #[test]
    fn iterate_estimates_hold() {
        let field = coulombish(0.5, 0.75);
        let w = [40.0, 0.0];
        for sign in [Sign::Plus, Sign::Minus] {
            let (_, report) =
                free_iterates(&field, &w, &[0.0, 1.0], &[0.1, 0.0], None, &cfg(sign)).unwrap();
            assert_eq!(report.order, 1);
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn iterate_order_moves_reciprocal_integers() {
        assert_eq!(iterate_order(0.75).0, 1);
        assert_eq!(iterate_order(0.3).0, 3);
        let (n, a) = iterate_order(1.0);
        assert_eq!(n, 1);
        assert!(a < 1.0 && a > 1.0 - 1e-11);
        let (n, _) = iterate_order(0.5);
        assert_eq!(n, 2);
    }

    #[test]
    fn boundedness_flags() {
        let field = coulombish(1.0, 1.0);
        let w = [20.0, 0.0];
        let z = solve_free(&field, &w, &[0.0, 0.0], &[0.0, 0.0], &cfg(Sign::Plus)).unwrap();
        let same = check_boundedness_vs_free(&z, &z).unwrap();
        assert_eq!(same.sup_difference, 0.0);
        assert!(!same.growth);
        let drift = Samples::from_fn(z.len(), 2, |i, o| {
            o[0] = z.position(i)[0] + 0.5 * z.times[i];
            o[1] = z.position(i)[1];
        });
        let shifted = Trajectory::new(z.times.clone(), drift, z.velocities.clone()).unwrap();
        assert!(check_boundedness_vs_free(&shifted, &z).unwrap().growth);
        let other =
            Trajectory::new(vec![0.0, 1.0], Samples::zeros(2, 2), Samples::zeros(2, 2)).unwrap();
        assert!(matches!(
            check_boundedness_vs_free(&z, &other),
            Err(Error::Usage(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn deviation_cone_holds_for_admissible_inputs(
            speed in 12.0f64..200.0,
            angle in 0.0f64..std::f64::consts::TAU,
            offset in -2.0f64..2.0,
            hx in -0.3f64..0.3,
            hy in -0.3f64..0.3,
        ) {
            let field = coulombish(1.0, 1.0);
            let w = [speed * angle.cos(), speed * angle.sin()];
            let x = [-offset * angle.sin(), offset * angle.cos()];
            let h = [hx, hy];
            let c = cfg(Sign::Plus);
            if let Ok(adm) = check_admissible(field.profile(), &w, &x, &w, &h) {
                let tr = solve_free(&field, &w, &x, &h, &c).unwrap();
                let base = [x[0] + h[0], x[1] + h[1]];
                prop_assert!(deviation_ratio(&tr, &base, &w, adm.c_prime) <= 1.0);
            }
        }
    }
}
