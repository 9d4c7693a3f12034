//! Born-type inequalities and high-energy limits along lines `τ ↦ τsθ + x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::ForceField;
use crate::vecops::{dist, dot, norm, Samples};
use crate::xray::{force_transform, potential_transform, LineParam, Part};

use super::bounds::{s_threshold, BornBounds, ThresholdVariant};
use super::data::{scatter, ScatteringDatum};
use super::flow::{full_integral, moments, sample, scattering_grid};
use super::{default_radius, Flavor, ScatterConfig};

/// Integrals of the force along the straight line `τ ↦ τsθ + x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineIntegrals {
    /// `∫ F(τsθ+x) dτ`.
    pub force: Vec<f64>,
    /// `∫ F^s(τsθ+x) dτ`.
    pub short_force: Vec<f64>,
    /// `∫_{-∞}^0∫_{-∞}^σ F^s(τsθ+x) dτ dσ`.
    pub short_past: Vec<f64>,
    /// `∫_0^∞∫_σ^∞ F^s(τsθ+x) dτ dσ`.
    pub short_future: Vec<f64>,
}

pub fn straight_line_integrals(
    field: &ForceField,
    theta: &[f64],
    x: &[f64],
    s: f64,
    cfg: &ScatterConfig,
) -> Result<LineIntegrals> {
    let alpha = field.profile().alpha;
    let grid = scattering_grid(cfg, alpha, s);
    let t = grid.nodes();
    let pos = Samples::from_fn(t.len(), theta.len(), |i, o| {
        for k in 0..o.len() {
            o[k] = t[i] * s * theta[k] + x[k];
        }
    });
    let fl = sample(field.long().as_ref(), &pos);
    let fs = sample(field.short().as_ref(), &pos);
    let (force, _) = full_integral(&grid, &fl.add(&fs), alpha);
    let (short_force, _) = full_integral(&grid, &fs, alpha);
    let (short_past, short_future, _) = moments(&grid, &fs, alpha);
    Ok(LineIntegrals {
        force,
        short_force,
        short_past,
        short_future,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            name: name.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    pub flavor: Flavor,
    pub s: f64,
    pub r: f64,
    pub threshold: f64,
    pub checks: Vec<BoundCheck>,
    pub pass: bool,
    pub datum: ScatteringDatum,
}

fn unit_line(theta: &[f64], x: &[f64]) -> Result<LineParam> {
    LineParam::normalized(theta, x)
}

/// Threshold speed and radius of the Born inequalities for `flavor`.
pub fn born_threshold(
    field: &ForceField,
    x_norm: f64,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<(f64, f64)> {
    let profile = field.profile();
    let (variant, r) = match flavor {
        Flavor::Standard | Flavor::IterateN => (ThresholdVariant::S0, cfg.r.unwrap_or(0.5)),
        Flavor::Modified => (
            ThresholdVariant::S0Tilde,
            cfg.r.unwrap_or(default_radius(Flavor::Modified, x_norm)),
        ),
    };
    let beta = profile.beta();
    if beta == 0.0 {
        return Ok((0.0, r));
    }
    Ok((
        s_threshold(x_norm, r, beta, profile.alpha, variant, profile.dim)?,
        r,
    ))
}

/// Evaluates both sides of the two Born inequalities of `flavor` at speed `s`.
pub fn verify_theorem_bounds(
    field: &ForceField,
    theta: &[f64],
    x: &[f64],
    s: f64,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<TheoremReport> {
    if flavor == Flavor::IterateN {
        return Err(Error::Usage(
            "explicit Born bounds are stated for the standard and modified data only".into(),
        ));
    }
    let line = unit_line(theta, x)?;
    let x_norm = norm(&line.x);
    let (threshold, r) = born_threshold(field, x_norm, flavor, cfg)?;
    if !(s > threshold) {
        return Err(
            Error::infeasible("speed s > threshold", s, threshold).with_hint(format!(
                "Born bounds need s above {threshold:.6e} for r = {r}"
            )),
        );
    }
    let v: Vec<f64> = line.theta.iter().map(|c| s * c).collect();
    let run_cfg = ScatterConfig { r: Some(r), ..*cfg };
    let datum = scatter(field, &v, &line.x, flavor, &run_cfg)?;
    let li = straight_line_integrals(field, &line.theta, &line.x, s, cfg)?;
    let bb = BornBounds::new(field.profile(), x_norm, s, r);
    let checks = match flavor {
        Flavor::Standard => {
            let lin: Vec<f64> = (0..v.len())
                .map(|k| datum.b_sc[k] - datum.w[k] - li.short_past[k] + li.short_future[k])
                .collect();
            vec![
                BoundCheck::new(
                    "velocity Born bound |a_sc - int F(line)|",
                    dist(&datum.a_sc, &li.force),
                    bb.velocity(),
                ),
                BoundCheck::new(
                    "position Born bound |b_sc - W - past F^s + future F^s|",
                    norm(&lin),
                    bb.position(),
                ),
            ]
        }
        _ => {
            let vel: Vec<f64> = (0..v.len())
                .map(|k| datum.a_sc[k] - datum.w[k] - li.short_force[k])
                .collect();
            let pos: Vec<f64> = (0..v.len())
                .map(|k| datum.b_sc[k] - li.short_past[k] + li.short_future[k])
                .collect();
            vec![
                BoundCheck::new(
                    "modified velocity Born bound |a_sc - W - int F^s(line)|",
                    norm(&vel),
                    bb.modified_velocity(),
                ),
                BoundCheck::new(
                    "modified position Born bound |b_sc - past F^s + future F^s|",
                    norm(&pos),
                    bb.modified_position(),
                ),
            ]
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(TheoremReport {
        flavor,
        s,
        r,
        threshold,
        checks,
        pass,
        datum,
    })
}

/// Two-point Richardson extrapolation for an error `∝ s^-order`.
pub fn richardson(s1: f64, y1: &[f64], s2: f64, y2: &[f64], order: f64) -> Vec<f64> {
    let (w1, w2) = (s1.powf(order), s2.powf(order));
    y1.iter()
        .zip(y2)
        .map(|(a, b)| (w2 * b - w1 * a) / (w2 - w1))
        .collect()
}

/// Least-squares slope of `log y` against `log s`, ignoring zero entries.
pub fn loglog_slope(s: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = s
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    /// `s a_sc` (standard, iterate) or `s (ã_sc - W̃)` (modified).
    pub velocity_scaled: Vec<f64>,
    /// `s² θ·(b_sc - W)` (standard, iterate) or `s² θ·b̃_sc` (modified).
    pub position_scaled: f64,
    pub velocity_error: f64,
    pub position_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub flavor: Flavor,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// `PF(θ,x)` (standard, iterate) or `PF^s(θ,x)` (modified).
    pub velocity_target: Vec<f64>,
    /// `-PV^s(θ,x)`.
    pub position_target: f64,
    pub richardson_order: f64,
    pub velocity_limit: Vec<f64>,
    pub position_limit: f64,
    /// Relative errors of the extrapolated limits.
    pub velocity_limit_error: f64,
    pub position_limit_error: f64,
    pub velocity_slope: f64,
    pub position_slope: f64,
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// The scaled data along a ladder of speeds, their Richardson limits and
/// the X-ray targets by direct line integration.
pub fn high_energy_sweep(
    field: &ForceField,
    theta: &[f64],
    x: &[f64],
    speeds: &[f64],
    flavor: Flavor,
    order: f64,
    cfg: &ScatterConfig,
) -> Result<SweepTable> {
    if speeds.len() < 2 || speeds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "the speed ladder needs at least two increasing entries".into(),
        ));
    }
    if !(order > 0.0) {
        return Err(Error::Domain("Richardson order must be positive".into()));
    }
    let line = unit_line(theta, x)?;
    let (threshold, _) = born_threshold(field, norm(&line.x), flavor, cfg)?;
    if speeds[0] <= threshold {
        return Err(Error::infeasible(
            "speed s > threshold",
            speeds[0],
            threshold,
        ));
    }
    let velocity_target = match flavor {
        Flavor::Modified => force_transform(field, Part::Short, &line)?.0,
        _ => force_transform(field, Part::Total, &line)?.0,
    };
    let position_target = if field.has_short() {
        -potential_transform(field, Part::Short, &line)?.0
    } else {
        0.0
    };
    let data: Vec<Result<ScatteringDatum>> = speeds
        .par_iter()
        .map(|&s| {
            let v: Vec<f64> = line.theta.iter().map(|c| s * c).collect();
            scatter(field, &v, &line.x, flavor, cfg)
        })
        .collect();
    let vt = norm(&velocity_target);
    let mut rows = Vec::with_capacity(speeds.len());
    for (&s, d) in speeds.iter().zip(data) {
        let d = d?;
        let (vel, pos): (Vec<f64>, f64) = match flavor {
            Flavor::Modified => (
                d.a_sc.iter().zip(&d.w).map(|(a, w)| s * (a - w)).collect(),
                s * s * dot(&line.theta, &d.b_sc),
            ),
            _ => {
                let bw: Vec<f64> = d.b_sc.iter().zip(&d.w).map(|(b, w)| b - w).collect();
                (
                    d.a_sc.iter().map(|a| s * a).collect(),
                    s * s * dot(&line.theta, &bw),
                )
            }
        };
        rows.push(SweepRow {
            s,
            velocity_error: rel(dist(&vel, &velocity_target), vt),
            position_error: rel((pos - position_target).abs(), position_target.abs()),
            velocity_scaled: vel,
            position_scaled: pos,
        });
    }
    let (r1, r2) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    let velocity_limit = richardson(r1.s, &r1.velocity_scaled, r2.s, &r2.velocity_scaled, order);
    let position_limit = richardson(
        r1.s,
        &[r1.position_scaled],
        r2.s,
        &[r2.position_scaled],
        order,
    )[0];
    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let ve: Vec<f64> = rows.iter().map(|r| r.velocity_error).collect();
    let pe: Vec<f64> = rows.iter().map(|r| r.position_error).collect();
    Ok(SweepTable {
        flavor,
        theta: line.theta.clone(),
        x: line.x.clone(),
        velocity_limit_error: rel(dist(&velocity_limit, &velocity_target), vt),
        position_limit_error: rel(
            (position_limit - position_target).abs(),
            position_target.abs(),
        ),
        velocity_slope: loglog_slope(&s, &ve),
        position_slope: loglog_slope(&s, &pe),
        rows,
        velocity_target,
        position_target,
        richardson_order: order,
        velocity_limit,
        position_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_the_leading_term() {
        let f = |s: f64| 2.0 + 3.0 / s;
        let l = richardson(10.0, &[f(10.0)], 20.0, &[f(20.0)], 1.0);
        assert!((l[0] - 2.0).abs() < 1e-14);
        let g = |s: f64| 2.0 + 3.0 / (s * s);
        let l = richardson(10.0, &[g(10.0)], 20.0, &[g(20.0)], 2.0);
        assert!((l[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let s = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = s.iter().map(|v: &f64| 5.0 * v.powf(-2.5)).collect();
        assert!((loglog_slope(&s, &y) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_field_passes_trivially() {
        let field = ForceField::zero(2);
        let rep = verify_theorem_bounds(
            &field,
            &[1.0, 0.0],
            &[0.0, 0.5],
            50.0,
            Flavor::Standard,
            &ScatterConfig::default(),
        )
        .unwrap();
        assert!(rep.pass);
        for c in &rep.checks {
            assert_eq!(c.lhs, 0.0);
            assert_eq!(c.rhs, 0.0);
        }
    }

    #[test]
    fn below_threshold_is_infeasible() {
        let field = crate::potentials::demo_field();
        let e = verify_theorem_bounds(
            &field,
            &[1.0, 0.0],
            &[0.0, 0.5],
            100.0,
            Flavor::Standard,
            &ScatterConfig::default(),
        )
        .unwrap_err();
        assert!(e.is_infeasible());
    }
}
