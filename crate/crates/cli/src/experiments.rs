//! Execution of each experiment kind.

use std::io::Write;

use log::{info, warn};
use lrscatter::free_dynamics::{solve_free, FreeFlowConfig};
use lrscatter::oracle::{oracle_scattering, relative_data_error, OracleOutcome};
use lrscatter::potentials::{mu_threshold, ForceField};
use lrscatter::scattering::{
    born_threshold, bound_constants, high_energy_sweep, scatter, verify_theorem_bounds, Flavor,
    ScatterConfig,
};
use lrscatter::vecops::{norm, scale};
use lrscatter::xray::{reconstruct_short_range, sinogram_threshold, ReconGrid, SinoSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, Input, Line, RandomInputs, SpeedLadder};
use crate::error::CliError;
use crate::output::Outputs;

/// Unit direction and an orthogonal offset, drawn in input order.
fn draw_inputs(spec: &RandomInputs, dim: usize, seed: u64) -> Vec<Input> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&u);
        if n > 1e-3 && n <= 1.0 {
            return scale(&u, 1.0 / n);
        }
    };
    (0..spec.count)
        .map(|_| {
            let theta = unit(&mut rng);
            let speed = rng.gen_range(spec.speed[0]..=spec.speed[1]);
            let length = rng.gen_range(spec.offset[0]..=spec.offset[1]);
            let mut x = unit(&mut rng);
            let d: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            for (xi, ti) in x.iter_mut().zip(&theta) {
                *xi -= d * ti;
            }
            let n = norm(&x);
            let x = if n > 0.0 {
                scale(&x, length / n)
            } else {
                vec![0.0; dim]
            };
            Input {
                v: scale(&theta, speed),
                x,
            }
        })
        .collect()
}

fn all_inputs(
    inputs: &[Input],
    random: &Option<RandomInputs>,
    dim: usize,
    seed: u64,
) -> Vec<Input> {
    let mut out = inputs.to_vec();
    if let Some(r) = random {
        out.extend(draw_inputs(r, dim, seed));
    }
    out
}

fn unit_line(line: &Line) -> (Vec<f64>, Vec<f64>) {
    (scale(&line.theta, 1.0 / norm(&line.theta)), line.x.clone())
}

/// Speeds of a ladder for a line at offset `x_norm`.
fn speeds(
    ladder: &SpeedLadder,
    field: &ForceField,
    x_norm: f64,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<Vec<f64>, CliError> {
    match (&ladder.speeds, &ladder.threshold_factors) {
        (Some(s), _) => Ok(s.clone()),
        (None, Some(f)) => {
            let (thr, _) = born_threshold(field, x_norm, flavor, cfg)?;
            Ok(f.iter().map(|k| k * thr).collect())
        }
        (None, None) => unreachable!("validated"),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn run(
    cfg: &ExperimentConfig,
    field: &ForceField,
    seed: u64,
    out: &Outputs,
) -> Result<Vec<String>, CliError> {
    let sc = &cfg.scatter;
    let dim = field.dim();
    let kind = cfg.experiment.name();
    let mut files = Vec::new();
    match &cfg.experiment {
        Experiment::Free {
            w,
            x,
            h,
            sign,
            backend,
        } => {
            let fcfg = FreeFlowConfig {
                sign: *sign,
                grid: sc.grid,
                picard_tol: sc.free_tol,
                max_iter: sc.free_max_iter,
                backend: *backend,
            };
            let h = h.clone().unwrap_or_else(|| vec![0.0; dim]);
            let traj = solve_free(field, w, x, &h, &fcfg)?;
            let mut header = vec!["t".to_string()];
            header.extend((1..=dim).map(|k| format!("z{k}")));
            header.extend((1..=dim).map(|k| format!("dz{k}")));
            let rows = (0..traj.len()).map(|i| {
                let mut r = vec![traj.times[i]];
                r.extend_from_slice(traj.position(i));
                r.extend_from_slice(traj.velocity(i));
                r
            });
            files.push(out.csv("free.csv", &header, rows)?);
            let rec = json!({
                "w": w, "x": x, "h": h, "sign": sign, "backend": backend,
                "nodes": traj.len(),
                "iterations": traj.diagnostics.iterations,
                "residual": traj.diagnostics.residual,
                "residuals": traj.diagnostics.residuals,
                "tail_bound": traj.diagnostics.tail_bound,
            });
            files.push(out.jsonl("free.jsonl", kind, [rec])?);
        }
        Experiment::Scatter {
            inputs,
            random,
            flavor,
        } => {
            let inputs = all_inputs(inputs, random, dim, seed);
            let data: Vec<_> = inputs
                .par_iter()
                .map(|inp| scatter(field, &inp.v, &inp.x, *flavor, sc))
                .collect::<Result<_, _>>()?;
            info!("{} scattering data computed", data.len());
            files.push(out.jsonl("scatter.jsonl", kind, data.iter().map(to_value))?);
        }
        Experiment::Sweep {
            lines,
            ladder,
            flavor,
            richardson_order,
        } => {
            let tables: Vec<_> = lines
                .par_iter()
                .map(|l| {
                    let (theta, x) = unit_line(l);
                    let s = speeds(ladder, field, norm(&x), *flavor, sc)?;
                    high_energy_sweep(field, &theta, &x, &s, *flavor, *richardson_order, sc)
                        .map_err(CliError::from)
                })
                .collect::<Result<_, _>>()?;
            let mut header = vec!["line".to_string(), "s".to_string()];
            header.extend((1..=dim).map(|k| format!("velocity_scaled{k}")));
            header
                .extend(["position_scaled", "velocity_error", "position_error"].map(String::from));
            let rows: Vec<Vec<f64>> = tables
                .iter()
                .enumerate()
                .flat_map(|(i, t)| {
                    t.rows.iter().map(move |r| {
                        let mut row = vec![i as f64, r.s];
                        row.extend_from_slice(&r.velocity_scaled);
                        row.extend([r.position_scaled, r.velocity_error, r.position_error]);
                        row
                    })
                })
                .collect();
            files.push(out.csv("sweep.csv", &header, rows)?);
            let recs = tables.iter().enumerate().map(|(i, t)| {
                let mut v = to_value(t);
                v["line"] = json!(i);
                v.as_object_mut().expect("object").remove("rows");
                v
            });
            files.push(out.jsonl("sweep.jsonl", kind, recs)?);
        }
        Experiment::Reconstruct {
            target,
            flavor,
            angles,
            offsets,
            offset_max,
            grid_size,
            extent,
            ladder,
            richardson_order,
        } => {
            let spec = SinoSpec {
                angle_count: *angles,
                offset_count: *offsets,
                offset_max: *offset_max,
                grid: ReconGrid {
                    size: *grid_size,
                    extent: *extent,
                },
                richardson_order: *richardson_order,
            };
            let s = match (&ladder.speeds, &ladder.threshold_factors) {
                (Some(s), _) => s.clone(),
                (None, Some(f)) => {
                    let thr = sinogram_threshold(field, &spec, *flavor, sc)?;
                    f.iter().map(|k| k * thr).collect()
                }
                (None, None) => unreachable!("validated"),
            };
            let rec = reconstruct_short_range(field, &s, &spec, *target, *flavor, sc)?;
            if let Some(w) = &rec.resolution_warning {
                warn!("{w}");
            }
            let comps = rec.field.components.len();
            let mut header = vec!["y0".to_string(), "y1".to_string()];
            header.extend((0..comps).map(|k| format!("recon{k}")));
            header.extend((0..comps).map(|k| format!("truth{k}")));
            let pts = spec.grid.points();
            let rows = pts.iter().enumerate().map(|(i, p)| {
                let mut r = vec![p[0], p[1]];
                r.extend(rec.field.components.iter().map(|c| c[i]));
                r.extend(rec.truth.components.iter().map(|c| c[i]));
                r
            });
            files.push(out.csv("reconstruct.csv", &header, rows)?);
            let report = json!({
                "target": rec.target,
                "flavor": rec.flavor,
                "speeds": rec.speeds,
                "sinogram": {"angles": angles, "offsets": offsets, "offset_max": offset_max},
                "grid": spec.grid,
                "rel_l2_error": rec.rel_l2_error,
                "inversion_floor": rec.inversion_floor,
                "ladder": rec.ladder,
                "resolution_warning": rec.resolution_warning,
            });
            files.push(out.jsonl("reconstruct.jsonl", kind, [report])?);
        }
        Experiment::Verify {
            lines,
            ladder,
            flavor,
        } => {
            let mut jobs = Vec::new();
            for (i, l) in lines.iter().enumerate() {
                let (theta, x) = unit_line(l);
                for s in speeds(ladder, field, norm(&x), *flavor, sc)? {
                    jobs.push((i, theta.clone(), x.clone(), s));
                }
            }
            let reports: Vec<_> = jobs
                .par_iter()
                .map(|(i, theta, x, s)| {
                    verify_theorem_bounds(field, theta, x, *s, *flavor, sc).map(|r| (*i, r))
                })
                .collect::<Result<_, _>>()?;
            let failed = reports.iter().filter(|(_, r)| !r.pass).count();
            if failed > 0 {
                warn!("{failed} bound checks failed");
            }
            let recs = reports.iter().map(|(i, r)| {
                json!({
                    "line": i, "flavor": r.flavor, "s": r.s, "r": r.r, "threshold": r.threshold,
                    "checks": r.checks, "pass": r.pass,
                })
            });
            files.push(out.jsonl("verify.jsonl", kind, recs)?);
        }
        Experiment::OracleCheck {
            inputs,
            random,
            oracle,
        } => {
            let inputs = all_inputs(inputs, random, dim, seed);
            let recs: Vec<Value> = inputs
                .par_iter()
                .map(|inp| -> Result<Value, CliError> {
                    let solver = scatter(field, &inp.v, &inp.x, Flavor::Standard, sc)?;
                    Ok(match oracle_scattering(field, &inp.v, &inp.x, oracle)? {
                        OracleOutcome::Scattered(o) => {
                            let err = relative_data_error(&o.a, &o.b, &solver.a, &solver.b);
                            json!({
                                "v_minus": inp.v, "x_minus": inp.x,
                                "relative_error": err, "agree": err <= 1e-5,
                                "solver": {"a": solver.a, "b": solver.b, "a_sc": solver.a_sc, "b_sc": solver.b_sc},
                                "oracle": o,
                            })
                        }
                        OracleOutcome::Captured(c) => json!({
                            "v_minus": inp.v, "x_minus": inp.x, "captured": c, "agree": false,
                        }),
                    })
                })
                .collect::<Result<_, _>>()?;
            files.push(out.jsonl("oracle-check.jsonl", kind, recs)?);
        }
    }
    Ok(files.iter().map(|p| p.display().to_string()).collect())
}

/// One row of the feasibility table.
struct Feasibility {
    label: String,
    speed: f64,
    x_norm: f64,
    flavor: Flavor,
}

/// Prints `μ`, `ρ`, `λ` and the threshold for every planned input without
/// solving anything. Returns the number of warnings.
pub fn feasibility(
    cfg: &ExperimentConfig,
    field: &ForceField,
    seed: u64,
    w: &mut impl Write,
) -> Result<usize, CliError> {
    let sc = &cfg.scatter;
    let dim = field.dim();
    let mu = mu_threshold(field.profile())?;
    let mut rows = Vec::new();
    match &cfg.experiment {
        Experiment::Free { w: v, x, .. } => rows.push(Feasibility {
            label: "free".into(),
            speed: norm(v),
            x_norm: norm(x),
            flavor: Flavor::Standard,
        }),
        Experiment::Scatter { inputs, random, .. }
        | Experiment::OracleCheck { inputs, random, .. } => {
            let flavor = match &cfg.experiment {
                Experiment::Scatter { flavor, .. } => *flavor,
                _ => Flavor::Standard,
            };
            for (i, inp) in all_inputs(inputs, random, dim, seed).iter().enumerate() {
                rows.push(Feasibility {
                    label: format!("input {i}"),
                    speed: norm(&inp.v),
                    x_norm: norm(&inp.x),
                    flavor,
                });
            }
        }
        Experiment::Sweep {
            lines,
            ladder,
            flavor,
            ..
        }
        | Experiment::Verify {
            lines,
            ladder,
            flavor,
        } => {
            for (i, l) in lines.iter().enumerate() {
                let x_norm = norm(&l.x);
                for s in speeds(ladder, field, x_norm, *flavor, sc)? {
                    rows.push(Feasibility {
                        label: format!("line {i}"),
                        speed: s,
                        x_norm,
                        flavor: *flavor,
                    });
                }
            }
        }
        Experiment::Reconstruct {
            flavor,
            offsets,
            offset_max,
            ladder,
            ..
        } => {
            let spec = SinoSpec {
                angle_count: 2,
                offset_count: *offsets,
                offset_max: *offset_max,
                grid: ReconGrid {
                    size: 2,
                    extent: 1.0,
                },
                richardson_order: 1.0,
            };
            let thr = sinogram_threshold(field, &spec, *flavor, sc)?;
            let s = match (&ladder.speeds, &ladder.threshold_factors) {
                (Some(s), _) => s.clone(),
                (None, Some(f)) => f.iter().map(|k| k * thr).collect(),
                (None, None) => unreachable!("validated"),
            };
            for v in s {
                rows.push(Feasibility {
                    label: "outermost line".into(),
                    speed: v,
                    x_norm: *offset_max,
                    flavor: *flavor,
                });
            }
        }
    }
    let io = |e| CliError::io(std::path::Path::new("<stdout>"), e);
    writeln!(w, "mu = {mu:.6e}").map_err(io)?;
    writeln!(
        w,
        "{:<16} {:>10} {:>13} {:>8} {:>8} {:>13} {:>13} {:>13}",
        "input", "flavor", "|v|", "|x|", "r", "rho", "lambda", "threshold"
    )
    .map_err(io)?;
    let mut warnings = 0;
    for row in &rows {
        let (thr, r) = born_threshold(field, row.x_norm, row.flavor, sc)
            .map_err(|e| CliError::config("scatter.r", e.to_string()))?;
        let bc = bound_constants(field.profile(), row.x_norm, row.speed, r)
            .map_err(|e| CliError::config("scatter.r", e.to_string()))?;
        let rho = if row.flavor == Flavor::Modified {
            bc.rho_tilde
        } else {
            bc.rho
        };
        writeln!(
            w,
            "{:<16} {:>10} {:>13.6e} {:>8.3} {:>8.4} {:>13.6e} {:>13.6e} {:>13.6e}",
            row.label,
            row.flavor.name(),
            row.speed,
            row.x_norm,
            r,
            rho,
            bc.lambda,
            thr
        )
        .map_err(io)?;
        if row.speed < mu {
            warnings += 1;
            writeln!(
                w,
                "warning: {}: |v| = {:.6e} is below mu; use |v| >= {mu:.6e}",
                row.label, row.speed
            )
            .map_err(io)?;
        } else if row.speed <= thr {
            warnings += 1;
            writeln!(
                w,
                "warning: {}: |v| = {:.6e} is below the bound threshold {thr:.6e}; solves may be infeasible",
                row.label, row.speed
            )
            .map_err(io)?;
        }
    }
    Ok(warnings)
}
