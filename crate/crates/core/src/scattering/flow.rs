//! Free references on the scattering grid and tail-corrected integrals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::free_dynamics::{check_admissible, free_orbit, iterate_order, Sign, Stop};
use crate::grid::TimeGrid;
use crate::potentials::{mu_of_sigma, mu_threshold, ForceField, Potential};
use crate::vecops::{dot, norm, Samples};

use super::{Flavor, ScatterConfig};

pub(crate) fn scattering_grid(cfg: &ScatterConfig, alpha: f64, speed: f64) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::symmetric(
        &cfg.grid,
        speed,
        cfg.grid.reach_for(alpha),
    ))
}

pub(crate) fn sample(p: &dyn Potential, x: &Samples) -> Samples {
    let mut out = Samples::zeros(x.len(), x.dim);
    if p.is_zero() {
        return out;
    }
    for (row, o) in x.rows().zip(out.data.chunks_exact_mut(x.dim)) {
        p.force(row, o);
    }
    out
}

pub(crate) fn shifted(x: &Samples, h: &[f64]) -> Samples {
    Samples::from_fn(x.len(), x.dim, |i, o| {
        for ((o, a), b) in o.iter_mut().zip(x.row(i)).zip(h) {
            *o = a + b;
        }
    })
}

/// `(∫_{-∞}^∞ g, tail)` for `g ~ |t|^-(α+1)`; the tail beyond the grid is
/// added in closed form and its size returned as an error bar.
pub(crate) fn full_integral(grid: &TimeGrid, g: &Samples, alpha: f64) -> (Vec<f64>, f64) {
    let mut total = grid.integral(g);
    let tail = edge_tails(grid, g, alpha);
    for (t, (l, r)) in total.iter_mut().zip(tail.0.iter().zip(&tail.1)) {
        *t += l + r;
    }
    let size = norm(&tail.0) + norm(&tail.1);
    (total, size)
}

/// `(∫_{-∞}^0 g, ∫_0^∞ g, tail)` for `g ~ |t|^-(α+1)`.
pub(crate) fn half_integrals(
    grid: &TimeGrid,
    g: &Samples,
    alpha: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let (mut past, mut future) = grid.split_integrals(g);
    let (l, r) = edge_tails(grid, g, alpha);
    for k in 0..g.dim {
        past[k] += l[k];
        future[k] += r[k];
    }
    (past, future, norm(&l) + norm(&r))
}

/// Past and future first moments `∫_{-∞}^0 |τ| g`, `∫_0^∞ τ g`, i.e. the
/// iterated integrals `∫_{-∞}^0∫_{-∞}^σ g` and `∫_0^∞∫_σ^∞ g`.
pub(crate) fn moments(grid: &TimeGrid, g: &Samples, alpha: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let t = grid.nodes();
    let weighted = Samples::from_fn(g.len(), g.dim, |i, o| {
        for (o, v) in o.iter_mut().zip(g.row(i)) {
            *o = t[i].abs() * v;
        }
    });
    half_integrals(grid, &weighted, alpha)
}

fn edge_tails(grid: &TimeGrid, g: &Samples, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let t = grid.nodes();
    let last = g.len() - 1;
    let l = g.row(0).iter().map(|v| v * t[0].abs() / alpha).collect();
    let r = g
        .row(last)
        .iter()
        .map(|v| v * t[last].abs() / alpha)
        .collect();
    (l, r)
}

/// `∫_{-∞}^t ∫_{-∞}^σ g` and its derivative at every node, for
/// `g ~ |t|^-(α+2)` as `t → -∞`.
pub(crate) fn double_from_past(
    grid: &TimeGrid,
    g: &Samples,
    alpha: f64,
) -> (Samples, Samples, f64) {
    let t0 = grid.nodes()[0].abs();
    let mut inner = grid.cumulative_left(g);
    let tail_in: Vec<f64> = g.row(0).iter().map(|v| v * t0 / (alpha + 1.0)).collect();
    add_row(&mut inner, &tail_in);
    let mut outer = grid.cumulative_left(&inner);
    let tail_out: Vec<f64> = inner.row(0).iter().map(|v| v * t0 / alpha).collect();
    add_row(&mut outer, &tail_out);
    (outer, inner, norm(&tail_in) + norm(&tail_out))
}

/// `∫_t^∞ ∫_σ^∞ g` at every node, for `g ~ t^-(α+2)` as `t → ∞`.
pub(crate) fn double_to_future(grid: &TimeGrid, g: &Samples, alpha: f64) -> (Samples, f64) {
    let t = grid.nodes();
    let tn = t[t.len() - 1];
    let last = g.len() - 1;
    let mut inner = grid.cumulative_right(g);
    let tail_in: Vec<f64> = g.row(last).iter().map(|v| v * tn / (alpha + 1.0)).collect();
    add_row(&mut inner, &tail_in);
    let mut outer = grid.cumulative_right(&inner);
    let tail_out: Vec<f64> = inner.row(last).iter().map(|v| v * tn / alpha).collect();
    add_row(&mut outer, &tail_out);
    (outer, norm(&tail_in) + norm(&tail_out))
}

fn add_row(s: &mut Samples, c: &[f64]) {
    let dim = s.dim;
    for row in s.data.chunks_exact_mut(dim) {
        for (r, v) in row.iter_mut().zip(c) {
            *r += v;
        }
    }
}

/// Checks `v·x = 0` within `1e-12 |v||x|` and re-projects `x` onto `v^⊥`.
pub(crate) fn orthogonalize(v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if v.len() != x.len() {
        return Err(Error::Domain("v and x must have the same length".into()));
    }
    if !v.iter().chain(x).all(|c| c.is_finite()) {
        return Err(Error::Domain("v and x must be finite".into()));
    }
    let sv = norm(v);
    if sv == 0.0 {
        return Err(Error::Domain("incoming velocity must be nonzero".into()));
    }
    let vx = dot(v, x);
    let tol = 1e-12 * sv * norm(x);
    if vx.abs() > tol {
        return Err(Error::infeasible(
            "orthogonality |v.x| <= 1e-12 |v||x|",
            vx.abs(),
            tol,
        ));
    }
    let c = vx / (sv * sv);
    Ok(x.iter().zip(v).map(|(xi, vi)| xi - c * vi).collect())
}

/// Speed precondition: `|v| ≥ μ`, or `|v| ≥ μ(|x|)` for the modified flavor.
pub(crate) fn check_speed(field: &ForceField, v: &[f64], x: &[f64], flavor: Flavor) -> Result<()> {
    let mu = match flavor {
        Flavor::Modified => mu_of_sigma(field.profile(), norm(x))?,
        _ => mu_threshold(field.profile())?,
    };
    let s = norm(v);
    if s < mu {
        return Err(Error::infeasible("speed |v| >= mu", s, mu));
    }
    Ok(())
}

/// The incoming reference `P` and the subtracted long-range force
/// `F^l(Q)` of the operator, sampled on the scattering grid.
#[derive(Debug, Clone)]
pub(crate) struct IncomingFlow {
    pub flavor: Flavor,
    pub grid: Arc<TimeGrid>,
    pub alpha: f64,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
    pub position: Samples,
    pub velocity: Samples,
    /// `F^l(Q)`, with `Q` the orbit whose long-range force is subtracted.
    pub reference_force: Samples,
}

impl IncomingFlow {
    pub fn new(
        field: &ForceField,
        v: &[f64],
        x: &[f64],
        flavor: Flavor,
        cfg: &ScatterConfig,
        grid: Option<Arc<TimeGrid>>,
    ) -> Result<Self> {
        let profile = field.profile();
        let alpha = profile.alpha;
        let grid = grid.unwrap_or_else(|| scattering_grid(cfg, alpha, norm(v)));
        let dim = v.len();
        let zero = vec![0.0; dim];
        let long = field.long().as_ref();
        let converge = Stop::Converge {
            tol: cfg.free_tol,
            max_iter: cfg.free_max_iter,
        };
        let (position, velocity, reference) = match flavor {
            Flavor::Standard => {
                check_admissible(profile, v, &zero, v, &zero)?;
                let z = free_orbit(long, alpha, &grid, Sign::Minus, v, &zero, converge, false)?;
                (shifted(&z.position, x), z.velocity, z.position)
            }
            Flavor::IterateN => {
                check_admissible(profile, v, &zero, v, &zero)?;
                let (n, _) = iterate_order(alpha);
                let mut z = free_orbit(
                    long,
                    alpha,
                    &grid,
                    Sign::Minus,
                    v,
                    &zero,
                    Stop::Steps(n + 1),
                    true,
                )?;
                let top = z.iterates.pop().expect("iterates are kept");
                let below = z.iterates.pop().expect("iterates are kept");
                (shifted(&top, x), z.velocity, below)
            }
            Flavor::Modified => {
                check_admissible(profile, v, x, v, &zero)?;
                let z = free_orbit(long, alpha, &grid, Sign::Minus, v, x, converge, false)?;
                (z.position.clone(), z.velocity, z.position)
            }
        };
        let reference_force = sample(long, &reference);
        Ok(IncomingFlow {
            flavor,
            grid,
            alpha,
            v: v.to_vec(),
            x: x.to_vec(),
            position,
            velocity,
            reference_force,
        })
    }
}

/// Outgoing long-range flow on the scattering grid: `z₊(w, base, ·)` for
/// the standard and modified flavors, `z_{+,N}(w, ·)` for `IterateN`.
/// Admissibility is checked against the reference `(v, x, h)`.
pub(crate) fn outgoing(
    field: &ForceField,
    grid: &TimeGrid,
    flavor: Flavor,
    w: &[f64],
    v_ref: &[f64],
    x_ref: &[f64],
    h: &[f64],
    cfg: &ScatterConfig,
) -> Result<Samples> {
    let profile = field.profile();
    check_admissible(profile, v_ref, x_ref, w, h)?;
    let base: Vec<f64> = x_ref.iter().zip(h).map(|(a, b)| a + b).collect();
    let stop = match flavor {
        Flavor::IterateN => Stop::Steps(iterate_order(profile.alpha).0),
        _ => Stop::Converge {
            tol: cfg.free_tol,
            max_iter: cfg.free_max_iter,
        },
    };
    let z = free_orbit(
        field.long().as_ref(),
        profile.alpha,
        grid,
        Sign::Plus,
        w,
        &base,
        stop,
        false,
    )?;
    Ok(z.position)
}
