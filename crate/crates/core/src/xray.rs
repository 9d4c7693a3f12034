//! X-ray transform over oriented lines, sinograms, 2-D filtered
//! back-projection, and reconstruction of the short-range part from
//! high-energy scattering data.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::ForceField;
use crate::quadrature::GaussLegendre;
use crate::scattering::{
    born_threshold, richardson, scatter, velocity_deflection, Flavor, ScatterConfig,
};
use crate::vecops::{dot, norm};

/// An oriented line `{tθ + x}` with `|θ| = 1` and `θ·x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParam {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

impl LineParam {
    /// Checks the invariants exactly as given.
    pub fn new(theta: &[f64], x: &[f64]) -> Result<Self> {
        if theta.len() != x.len() || theta.len() < 2 {
            return Err(Error::Domain(
                "line direction and offset need a common dimension >= 2".into(),
            ));
        }
        if (norm(theta) - 1.0).abs() > 1e-14 {
            return Err(Error::Domain(format!(
                "line direction has norm {}",
                norm(theta)
            )));
        }
        if dot(theta, x).abs() > 1e-12 * norm(x) {
            return Err(Error::Domain(
                "line offset is not orthogonal to the direction".into(),
            ));
        }
        Ok(LineParam {
            theta: theta.to_vec(),
            x: x.to_vec(),
        })
    }

    /// Normalizes `theta` and removes the `θ` component of `x`.
    pub fn normalized(theta: &[f64], x: &[f64]) -> Result<Self> {
        let n = norm(theta);
        if !(n > 0.0) || !n.is_finite() || theta.len() != x.len() {
            return Err(Error::Domain(
                "line direction must be a finite nonzero vector".into(),
            ));
        }
        let theta: Vec<f64> = theta.iter().map(|c| c / n).collect();
        let p = dot(&theta, x);
        let x: Vec<f64> = x.iter().zip(&theta).map(|(a, b)| a - p * b).collect();
        Ok(LineParam { theta, x })
    }

    /// The planar line with direction `(cos φ, sin φ)` at signed offset
    /// `p` along `θ^⊥ = (-sin φ, cos φ)`.
    pub fn planar(phi: f64, p: f64) -> Self {
        let (s, c) = phi.sin_cos();
        LineParam {
            theta: vec![c, s],
            x: vec![-p * s, p * c],
        }
    }

    pub fn point(&self, t: f64, out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = t * self.theta[k] + self.x[k];
        }
    }
}

/// Which part of a split field a transform is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Long,
    Short,
    Total,
}

/// A line integral with its estimated absolute error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineValue {
    pub value: Vec<f64>,
    pub error: f64,
}

fn gl15() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(15))
}

#[derive(Clone, Copy)]
enum Piece {
    Core,
    Right,
    Left,
}

struct Interval {
    a: f64,
    b: f64,
    piece: Piece,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

const CORE: f64 = 8.0;
const MAX_INTERVALS: usize = 4000;

/// `∫_ℝ f(tθ + x) dt` for a field decaying like `|y|^-decay`.
///
/// `[-8, 8]` is integrated directly and the two tails after the substitution
/// `t = ±8 e^u`; the tails are cut where the declared decay makes the
/// remainder negligible and the cut-off estimate is added to the error.
pub fn xray_transform(
    mut f: impl FnMut(&[f64], &mut [f64]),
    components: usize,
    decay: f64,
    line: &LineParam,
) -> Result<LineValue> {
    if !(decay > 1.0) {
        return Err(Error::Domain(format!(
            "x-ray transform needs decay > 1, got {decay}"
        )));
    }
    let rule = gl15();
    let dim = line.theta.len();
    let mut y = vec![0.0; dim];
    let mut buf = vec![0.0; components];
    let mut eval = |piece: Piece, u: f64, acc: &mut [f64], w: f64| {
        let (t, jac) = match piece {
            Piece::Core => (u, 1.0),
            Piece::Right => {
                let t = CORE * u.exp();
                (t, t)
            }
            Piece::Left => {
                let t = -CORE * u.exp();
                (t, -t)
            }
        };
        line.point(t, &mut y);
        f(&y, &mut buf);
        for k in 0..components {
            acc[k] += w * jac * buf[k];
        }
    };
    let mut gauss = |piece: Piece, a: f64, b: f64| -> Vec<f64> {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = vec![0.0; components];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            eval(piece, c + h * x, &mut acc, w * h);
        }
        acc
    };
    let span = (40.0 * std::f64::consts::LN_10 / (decay - 1.0)).min(700.0 - CORE.ln());
    let mut heap = BinaryHeap::new();
    let mut refine =
        |piece: Piece, a: f64, b: f64, whole: Option<Vec<f64>>, heap: &mut BinaryHeap<Interval>| {
            let whole = whole.unwrap_or_else(|| gauss(piece, a, b));
            let m = 0.5 * (a + b);
            let left = gauss(piece, a, m);
            let right = gauss(piece, m, b);
            let sum: Vec<f64> = left.iter().zip(&right).map(|(p, q)| p + q).collect();
            let err = whole
                .iter()
                .zip(&sum)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            heap.push(Interval {
                a,
                b: m,
                piece,
                value: left,
                error: 0.5 * err,
            });
            heap.push(Interval {
                a: m,
                b,
                piece,
                value: right,
                error: 0.5 * err,
            });
        };
    for (piece, a, b) in [
        (Piece::Core, -CORE, CORE),
        (Piece::Right, 0.0, span),
        (Piece::Left, 0.0, span),
    ] {
        refine(piece, a, b, None, &mut heap);
    }
    let total = |heap: &BinaryHeap<Interval>| {
        let mut v = vec![0.0; components];
        let mut e = 0.0;
        let mut mass = 0.0;
        for iv in heap.iter() {
            for k in 0..components {
                v[k] += iv.value[k];
            }
            e += iv.error;
            mass += iv.value.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        }
        (v, e, mass)
    };
    loop {
        let (v, e, mass) = total(&heap);
        let scale = v.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(mass);
        if e <= 1e-13 * scale || e < 1e-300 || heap.len() >= MAX_INTERVALS {
            let far = CORE * span.exp();
            let mut tail = 0.0;
            let mut y = vec![0.0; dim];
            let mut buf = vec![0.0; components];
            for t in [far, -far] {
                line.point(t, &mut y);
                f(&y, &mut buf);
                tail += buf.iter().fold(0.0f64, |m, c| m.max(c.abs())) * far / (decay - 1.0);
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Numeric(
                    "x-ray transform produced a non-finite value".into(),
                ));
            }
            return Ok(LineValue {
                value: v,
                error: e + tail,
            });
        }
        let worst = heap.pop().expect("nonempty");
        refine(worst.piece, worst.a, worst.b, Some(worst.value), &mut heap);
    }
}

/// Scalar convenience wrapper around [`xray_transform`].
pub fn xray_transform_scalar(
    f: impl Fn(&[f64]) -> f64,
    decay: f64,
    line: &LineParam,
) -> Result<(f64, f64)> {
    let lv = xray_transform(|y, o| o[0] = f(y), 1, decay, line)?;
    Ok((lv.value[0], lv.error))
}

fn check_dim(field: &ForceField, line: &LineParam) -> Result<()> {
    if field.dim() != line.theta.len() {
        return Err(Error::Domain(
            "line dimension differs from the field dimension".into(),
        ));
    }
    Ok(())
}

/// `P F^l`, `P F^s` or `P F` along `line`.
pub fn force_transform(
    field: &ForceField,
    part: Part,
    line: &LineParam,
) -> Result<(Vec<f64>, f64)> {
    check_dim(field, line)?;
    let alpha = field.profile().alpha;
    let n = field.dim();
    let decay = match part {
        Part::Short => alpha + 2.0,
        _ => alpha + 1.0,
    };
    let mut tmp = vec![0.0; n];
    let lv = match part {
        Part::Long => xray_transform(|y, o| field.force_long(y, o), n, decay, line)?,
        Part::Short => xray_transform(|y, o| field.force_short(y, o), n, decay, line)?,
        Part::Total => xray_transform(
            |y, o| {
                field.force_long(y, o);
                field.force_short(y, &mut tmp);
                for k in 0..n {
                    o[k] += tmp[k];
                }
            },
            n,
            decay,
            line,
        )?,
    };
    Ok((lv.value, lv.error))
}

/// `P V^s` along `line`. Only the short-range potential is integrable.
pub fn potential_transform(field: &ForceField, part: Part, line: &LineParam) -> Result<(f64, f64)> {
    check_dim(field, line)?;
    let alpha = field.profile().alpha;
    match part {
        Part::Short => xray_transform_scalar(|y| field.short().value(y), alpha + 1.0, line),
        _ if !field.has_long() => {
            xray_transform_scalar(|y| field.short().value(y), alpha + 1.0, line)
        }
        _ => Err(Error::Domain(format!(
            "the long-range potential decays like |x|^-{alpha} and has no x-ray transform"
        ))),
    }
}

/// Samples of a scalar or vector line transform on `[0, π) × offsets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    pub component_count: usize,
    /// `values[(i * offsets.len() + j) * component_count + k]`.
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(
        angle_count: usize,
        offset_count: usize,
        offset_max: f64,
        component_count: usize,
    ) -> Result<Self> {
        if angle_count == 0 || offset_count == 0 || component_count == 0 {
            return Err(Error::Domain("sinogram counts must be positive".into()));
        }
        if !(offset_max >= 0.0) || !offset_max.is_finite() {
            return Err(Error::Domain(
                "offset range must be finite and nonnegative".into(),
            ));
        }
        let angles = (0..angle_count)
            .map(|i| PI * i as f64 / angle_count as f64)
            .collect();
        let offsets = if offset_count == 1 {
            vec![0.0]
        } else {
            (0..offset_count)
                .map(|j| -offset_max + 2.0 * offset_max * j as f64 / (offset_count - 1) as f64)
                .collect()
        };
        Ok(Sinogram {
            angles,
            offsets,
            component_count,
            values: vec![0.0; angle_count * offset_count * component_count],
        })
    }

    pub fn get(&self, angle: usize, offset: usize) -> &[f64] {
        let c = self.component_count;
        let i = (angle * self.offsets.len() + offset) * c;
        &self.values[i..i + c]
    }

    /// Offset spacing, zero for a single offset.
    pub fn offset_step(&self) -> f64 {
        if self.offsets.len() < 2 {
            0.0
        } else {
            self.offsets[1] - self.offsets[0]
        }
    }

    pub fn lines(&self) -> impl Iterator<Item = LineParam> + '_ {
        self.angles
            .iter()
            .flat_map(move |&phi| self.offsets.iter().map(move |&p| LineParam::planar(phi, p)))
    }

    /// CSV with columns `angle,offset,c0,...`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let head: Vec<String> = (0..self.component_count).map(|k| format!("c{k}")).collect();
        writeln!(w, "angle,offset,{}", head.join(","))?;
        for (i, phi) in self.angles.iter().enumerate() {
            for (j, p) in self.offsets.iter().enumerate() {
                let vals: Vec<String> =
                    self.get(i, j).iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(w, "{phi:.17e},{p:.17e},{}", vals.join(","))?;
            }
        }
        Ok(())
    }
}

/// Evaluates `f` on every planar line of the grid, in angle-major order.
pub fn sample_sinogram(
    f: impl Fn(&LineParam) -> Result<Vec<f64>> + Sync,
    component_count: usize,
    angle_count: usize,
    offset_count: usize,
    offset_max: f64,
) -> Result<Sinogram> {
    let mut sino = Sinogram::zeros(angle_count, offset_count, offset_max, component_count)?;
    let lines: Vec<LineParam> = sino.lines().collect();
    let rows: Vec<Result<Vec<f64>>> = lines.par_iter().map(&f).collect();
    for (idx, row) in rows.into_iter().enumerate() {
        let row = row?;
        if row.len() != component_count {
            return Err(Error::Usage(
                "line function returned the wrong number of components".into(),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("sinogram value is not finite".into()));
        }
        sino.values[idx * component_count..(idx + 1) * component_count].copy_from_slice(&row);
    }
    Ok(sino)
}

/// Square pixel grid on `[-extent, extent]²`, pixel centers at the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconGrid {
    pub size: usize,
    pub extent: f64,
}

impl ReconGrid {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::Domain(
                "reconstruction grid needs size >= 2 and a positive extent".into(),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.size - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + self.spacing() * i as f64
    }

    /// Pixel centers, row-major with `y` as the row index.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.size * self.size);
        for iy in 0..self.size {
            for ix in 0..self.size {
                out.push([self.coord(ix), self.coord(iy)]);
            }
        }
        out
    }
}

/// Field samples on a [`ReconGrid`], one row-major image per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: ReconGrid,
    pub components: Vec<Vec<f64>>,
}

impl GridField {
    pub fn from_fn(grid: ReconGrid, count: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut components = vec![Vec::with_capacity(grid.size * grid.size); count];
        let mut buf = vec![0.0; count];
        for p in grid.points() {
            f(&p, &mut buf);
            for k in 0..count {
                components[k].push(buf[k]);
            }
        }
        GridField { grid, components }
    }

    pub fn l2(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `‖self - other‖ / ‖other‖` over all components; absolute when `other` vanishes.
    pub fn rel_l2_error(&self, other: &GridField) -> f64 {
        let diff: f64 = self
            .components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = other.l2();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Mass-weighted center of component `k`, using positive values only.
    pub fn center_of_mass(&self, k: usize) -> [f64; 2] {
        let mut m = 0.0;
        let mut c = [0.0; 2];
        for (p, v) in self.grid.points().iter().zip(&self.components[k]) {
            let w = v.max(0.0);
            m += w;
            c[0] += w * p[0];
            c[1] += w * p[1];
        }
        if m > 0.0 {
            [c[0] / m, c[1] / m]
        } else {
            [0.0, 0.0]
        }
    }

    /// CSV with columns `x,y,c0,...`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let head: Vec<String> = (0..self.components.len())
            .map(|k| format!("c{k}"))
            .collect();
        writeln!(w, "x,y,{}", head.join(","))?;
        for (i, p) in self.grid.points().iter().enumerate() {
            let vals: Vec<String> = self
                .components
                .iter()
                .map(|c| format!("{:.17e}", c[i]))
                .collect();
            writeln!(w, "{:.17e},{:.17e},{}", p[0], p[1], vals.join(","))?;
        }
        Ok(())
    }
}

/// Outcome of [`invert_fbp_2d`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbpResult {
    pub field: GridField,
    /// Set when the sinogram is coarser than the reconstruction grid.
    pub resolution_warning: Option<String>,
}

/// Ram-Lak filter with a raised-cosine window, as a frequency response of
/// length `len`, for offset spacing `d`.
fn ramp_filter(len: usize, d: f64, planner: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    let mut h = vec![Complex::new(0.0, 0.0); len];
    h[0].re = 0.25 / (d * d);
    for n in 1..len / 2 {
        if n % 2 == 1 {
            let v = -1.0 / ((n * n) as f64 * PI * PI * d * d);
            h[n].re = v;
            h[len - n].re = v;
        }
    }
    planner.plan_fft_forward(len).process(&mut h);
    for (k, c) in h.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 / len as f64;
        *c *= 0.5 * (1.0 + (2.0 * PI * f).cos());
    }
    h
}

/// Filtered back-projection of every sinogram component onto `grid`.
pub fn invert_fbp_2d(sino: &Sinogram, grid: &ReconGrid) -> Result<FbpResult> {
    grid.validate()?;
    let m = sino.offsets.len();
    let k_angles = sino.angles.len();
    if m < 2 {
        return Err(Error::Domain(
            "back-projection needs at least two offsets".into(),
        ));
    }
    if sino.values.len() != k_angles * m * sino.component_count {
        return Err(Error::Usage("sinogram values do not match its grid".into()));
    }
    let d = sino.offset_step();
    let mut warning = None;
    if d > grid.spacing() * (1.0 + 1e-12) {
        warning = Some(format!(
            "offset spacing {d:.3e} exceeds pixel spacing {:.3e}",
            grid.spacing()
        ));
    } else {
        let corner = grid.extent * std::f64::consts::SQRT_2;
        let arc = PI * corner / k_angles as f64;
        if arc > 2.0 * grid.spacing() {
            warning = Some(format!(
                "{k_angles} angles leave gaps of {arc:.3e} at the grid corners"
            ));
        }
    }
    if let Some(w) = &warning {
        log::warn!("resolution warning: {w}");
    }
    let len = (2 * m).next_power_of_two();
    let mut planner = FftPlanner::new();
    let filter = ramp_filter(len, d, &mut planner);
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let c = sino.component_count;
    // filtered[comp][angle][offset]
    let mut filtered = vec![vec![vec![0.0; m]; k_angles]; c];
    for comp in 0..c {
        for i in 0..k_angles {
            let mut buf = vec![Complex::new(0.0, 0.0); len];
            for j in 0..m {
                buf[j].re = sino.get(i, j)[comp];
            }
            fwd.process(&mut buf);
            for (b, h) in buf.iter_mut().zip(&filter) {
                *b *= h;
            }
            inv.process(&mut buf);
            for j in 0..m {
                filtered[comp][i][j] = buf[j].re * d / len as f64;
            }
        }
    }
    let trig: Vec<(f64, f64)> = sino.angles.iter().map(|a| a.sin_cos()).collect();
    let p0 = sino.offsets[0];
    let points = grid.points();
    let components = (0..c)
        .map(|comp| {
            points
                .par_iter()
                .map(|y| {
                    let mut acc = 0.0;
                    for (i, (s, co)) in trig.iter().enumerate() {
                        let p = -y[0] * s + y[1] * co;
                        let u = (p - p0) / d;
                        if u < 0.0 || u > (m - 1) as f64 {
                            continue;
                        }
                        let j = (u.floor() as usize).min(m - 2);
                        let frac = u - j as f64;
                        let row = &filtered[comp][i];
                        acc += (1.0 - frac) * row[j] + frac * row[j + 1];
                    }
                    acc * PI / k_angles as f64
                })
                .collect()
        })
        .collect();
    Ok(FbpResult {
        field: GridField {
            grid: *grid,
            components,
        },
        resolution_warning: warning,
    })
}

/// What the reconstruction recovers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconTarget {
    /// `F^s` from the velocity data.
    ForceFromA,
    /// `V^s` from the position data.
    PotentialFromB,
}

/// Sampling density of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinoSpec {
    pub angle_count: usize,
    pub offset_count: usize,
    pub offset_max: f64,
    pub grid: ReconGrid,
    /// Assumed order of the leading `s^-order` error in the extrapolation.
    pub richardson_order: f64,
}

/// Reconstruction quality when the ladder is cut at `s_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub s_max: f64,
    /// Relative L2 error against the analytic `F^s` or `V^s`.
    pub rel_l2_error: f64,
    /// Relative L2 distance to the inversion of exact line integrals.
    pub data_induced_error: f64,
    /// Relative L2 distance between extrapolated and exact sinograms.
    pub data_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub target: ReconTarget,
    pub flavor: Flavor,
    pub speeds: Vec<f64>,
    /// Reconstruction from the full ladder.
    pub field: GridField,
    pub truth: GridField,
    pub rel_l2_error: f64,
    /// Relative L2 error of the same inversion applied to exact line integrals.
    pub inversion_floor: f64,
    /// One entry per prefix of the ladder with at least two speeds.
    pub ladder: Vec<LadderStep>,
    pub resolution_warning: Option<String>,
}

/// Scaled data `s a_sc`, `s (ã_sc - W̃)`, `-s² θ·(b_sc - W)` or
/// `-s² θ·b̃_sc` at every speed, less `PF^l` where it is part of the limit.
fn line_ladder(
    field: &ForceField,
    line: &LineParam,
    speeds: &[f64],
    target: ReconTarget,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<Vec<Vec<f64>>> {
    let (threshold, _) = born_threshold(field, norm(&line.x), flavor, cfg)?;
    if speeds[0] <= threshold {
        return Err(Error::infeasible(
            "speed s > threshold",
            speeds[0],
            threshold,
        ));
    }
    let known = if target == ReconTarget::ForceFromA && flavor != Flavor::Modified {
        Some(force_transform(field, Part::Long, line)?.0)
    } else {
        None
    };
    speeds
        .iter()
        .map(|&s| {
            let v: Vec<f64> = line.theta.iter().map(|c| s * c).collect();
            let mut row: Vec<f64> = match (target, flavor) {
                (ReconTarget::ForceFromA, Flavor::Modified) => {
                    let d = scatter(field, &v, &line.x, flavor, cfg)?;
                    d.a_sc.iter().zip(&d.w).map(|(a, w)| s * (a - w)).collect()
                }
                (ReconTarget::ForceFromA, _) => {
                    velocity_deflection(field, &v, &line.x, flavor, cfg)?
                        .iter()
                        .map(|a| s * a)
                        .collect()
                }
                (ReconTarget::PotentialFromB, Flavor::Modified) => {
                    let d = scatter(field, &v, &line.x, flavor, cfg)?;
                    vec![-s * s * dot(&line.theta, &d.b_sc)]
                }
                (ReconTarget::PotentialFromB, _) => {
                    let d = scatter(field, &v, &line.x, flavor, cfg)?;
                    let bw: Vec<f64> = d.b_sc.iter().zip(&d.w).map(|(b, w)| b - w).collect();
                    vec![-s * s * dot(&line.theta, &bw)]
                }
            };
            if let Some(pl) = &known {
                for (a, b) in row.iter_mut().zip(pl) {
                    *a -= b;
                }
            }
            Ok(row)
        })
        .collect()
}

fn rel_distance(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Recovers `F^s` or `V^s` of a planar field from extrapolated scattering
/// data on a sinogram grid and compares with the field itself.
pub fn reconstruct_short_range(
    field: &ForceField,
    speeds: &[f64],
    spec: &SinoSpec,
    target: ReconTarget,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<Reconstruction> {
    if field.dim() != 2 {
        return Err(Error::Domain(
            "reconstruction is implemented for n = 2".into(),
        ));
    }
    if speeds.len() < 2 || speeds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "speed ladder needs at least two increasing entries".into(),
        ));
    }
    if !(spec.richardson_order > 0.0) {
        return Err(Error::Domain("Richardson order must be positive".into()));
    }
    spec.grid.validate()?;
    let comps = match target {
        ReconTarget::ForceFromA => 2,
        ReconTarget::PotentialFromB => 1,
    };
    let template = Sinogram::zeros(spec.angle_count, spec.offset_count, spec.offset_max, comps)?;
    let lines: Vec<LineParam> = template.lines().collect();
    let ladders: Vec<Vec<Vec<f64>>> = lines
        .par_iter()
        .map(|l| line_ladder(field, l, speeds, target, flavor, cfg))
        .collect::<Result<_>>()?;
    let exact = sample_sinogram(
        |line| match target {
            ReconTarget::ForceFromA => Ok(force_transform(field, Part::Short, line)?.0),
            ReconTarget::PotentialFromB if field.has_short() => {
                Ok(vec![potential_transform(field, Part::Short, line)?.0])
            }
            ReconTarget::PotentialFromB => Ok(vec![0.0]),
        },
        comps,
        spec.angle_count,
        spec.offset_count,
        spec.offset_max,
    )?;
    let truth = GridField::from_fn(spec.grid, comps, |y, o| match target {
        ReconTarget::ForceFromA => field.force_short(y, o),
        ReconTarget::PotentialFromB => o[0] = field.short().value(y),
    });
    let floor = invert_fbp_2d(&exact, &spec.grid)?;
    let mut ladder = Vec::with_capacity(speeds.len() - 1);
    let mut last = None;
    for k in 1..speeds.len() {
        let mut data = template.clone();
        for (idx, rows) in ladders.iter().enumerate() {
            let limit = richardson(
                speeds[k - 1],
                &rows[k - 1],
                speeds[k],
                &rows[k],
                spec.richardson_order,
            );
            data.values[idx * comps..(idx + 1) * comps].copy_from_slice(&limit);
        }
        let fbp = invert_fbp_2d(&data, &spec.grid)?;
        ladder.push(LadderStep {
            s_max: speeds[k],
            rel_l2_error: fbp.field.rel_l2_error(&truth),
            data_induced_error: fbp.field.rel_l2_error(&floor.field),
            data_rel_error: rel_distance(&data.values, &exact.values),
        });
        last = Some(fbp);
    }
    let fbp = last.expect("ladder has two speeds");
    Ok(Reconstruction {
        target,
        flavor,
        speeds: speeds.to_vec(),
        rel_l2_error: fbp.field.rel_l2_error(&truth),
        inversion_floor: floor.field.rel_l2_error(&truth),
        ladder,
        resolution_warning: fbp.resolution_warning,
        field: fbp.field,
        truth,
    })
}

/// Largest Born threshold over the offsets of `spec`; every speed of a
/// reconstruction ladder must exceed it.
pub fn sinogram_threshold(
    field: &ForceField,
    spec: &SinoSpec,
    flavor: Flavor,
    cfg: &ScatterConfig,
) -> Result<f64> {
    let grid = Sinogram::zeros(1, spec.offset_count, spec.offset_max, 1)?;
    grid.offsets
        .iter()
        .map(|p| born_threshold(field, p.abs(), flavor, cfg).map(|t| t.0))
        .try_fold(0.0f64, |m, t| t.map(|t| m.max(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(c: [f64; 2]) -> impl Fn(&[f64]) -> f64 {
        move |y| (-(y[0] - c[0]).powi(2) - (y[1] - c[1]).powi(2)).exp()
    }

    fn gaussian_sinogram(c: [f64; 2], na: usize, no: usize, pm: f64) -> Sinogram {
        let mut s = Sinogram::zeros(na, no, pm, 1).unwrap();
        for i in 0..na {
            let (sn, cs) = s.angles[i].sin_cos();
            for j in 0..no {
                let q = s.offsets[j] - (-c[0] * sn + c[1] * cs);
                s.values[i * no + j] = PI.sqrt() * (-q * q).exp();
            }
        }
        s
    }

    #[test]
    fn gaussian_through_origin() {
        let l = LineParam::new(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let (v, e) = xray_transform_scalar(gaussian([0.0, 0.0]), 3.0, &l).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-13);
        assert!(e < 1e-10 * v);
    }

    #[test]
    fn lorentzian_line_integral() {
        for (phi, p) in [(0.0, 0.0), (0.7, 1.3), (2.5, -4.0)] {
            let l = LineParam::planar(phi, p);
            let (v, e) = xray_transform_scalar(|y| 1.0 / (1.0 + dot(y, y)), 2.0, &l).unwrap();
            let exact = PI / (1.0 + p * p).sqrt();
            assert!((v - exact).abs() <= 1e-10 * exact, "{v} vs {exact}");
            assert!(e <= 1e-10 * exact);
        }
    }

    #[test]
    fn slow_decay_is_rejected() {
        let l = LineParam::planar(0.0, 0.0);
        assert!(matches!(
            xray_transform_scalar(|_| 1.0, 1.0, &l),
            Err(Error::Domain(_))
        ));
        assert!(LineParam::new(&[1.0, 0.1], &[0.0, 1.0]).is_err());
        assert!(LineParam::new(&[1.0, 0.0], &[0.1, 1.0]).is_err());
    }

    #[test]
    fn zero_field_gives_zero_sinogram_and_image() {
        let s = sample_sinogram(|_| Ok(vec![0.0]), 1, 8, 9, 2.0).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        let r = invert_fbp_2d(
            &s,
            &ReconGrid {
                size: 16,
                extent: 1.5,
            },
        )
        .unwrap();
        assert_eq!(r.field.l2(), 0.0);
    }

    #[test]
    fn radial_field_has_identical_angle_rows() {
        let f = |l: &LineParam| {
            Ok(vec![
                xray_transform_scalar(|y| 1.0 / (1.0 + dot(y, y)).powi(2), 4.0, l)?.0,
            ])
        };
        let s = sample_sinogram(f, 1, 12, 17, 3.0).unwrap();
        for i in 1..12 {
            for j in 0..17 {
                assert!((s.get(i, j)[0] - s.get(0, j)[0]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sinogram_is_linear() {
        let f = gaussian([0.4, -0.1]);
        let g = |y: &[f64]| 1.0 / (1.0 + dot(y, y)).powf(1.5);
        let sf = sample_sinogram(
            |l| Ok(vec![xray_transform_scalar(&f, 3.0, l)?.0]),
            1,
            6,
            9,
            2.0,
        )
        .unwrap();
        let sg = sample_sinogram(
            |l| Ok(vec![xray_transform_scalar(g, 3.0, l)?.0]),
            1,
            6,
            9,
            2.0,
        )
        .unwrap();
        let sfg = sample_sinogram(
            |l| Ok(vec![xray_transform_scalar(|y| f(y) + g(y), 3.0, l)?.0]),
            1,
            6,
            9,
            2.0,
        )
        .unwrap();
        for i in 0..sf.values.len() {
            assert!((sfg.values[i] - sf.values[i] - sg.values[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampled_gaussian_matches_closed_form() {
        let c = [0.3, -0.2];
        let s = sample_sinogram(
            |l| Ok(vec![xray_transform_scalar(gaussian(c), 3.0, l)?.0]),
            1,
            10,
            21,
            4.0,
        )
        .unwrap();
        let t = gaussian_sinogram(c, 10, 21, 4.0);
        for (a, b) in s.values.iter().zip(&t.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_round_trip() {
        let c = [0.0, 0.0];
        let s = gaussian_sinogram(c, 180, 257, 4.0);
        let grid = ReconGrid {
            size: 128,
            extent: 3.0,
        };
        let r = invert_fbp_2d(&s, &grid).unwrap();
        let truth = GridField::from_fn(grid, 1, |y, o| o[0] = gaussian(c)(y));
        let err = r.field.rel_l2_error(&truth);
        assert!(err <= 0.02, "round trip error {err}");
        assert!(r.resolution_warning.is_none());
    }

    #[test]
    fn shifted_bump_reconstructs_in_place() {
        let c = [0.8, -0.5];
        let s = gaussian_sinogram(c, 180, 257, 4.0);
        let grid = ReconGrid {
            size: 128,
            extent: 3.0,
        };
        let r = invert_fbp_2d(&s, &grid).unwrap();
        let com = r.field.center_of_mass(0);
        assert!((com[0] - c[0]).hypot(com[1] - c[1]) <= grid.spacing());
    }

    #[test]
    fn coarse_sinogram_warns() {
        let s = gaussian_sinogram([0.0, 0.0], 30, 17, 4.0);
        let r = invert_fbp_2d(
            &s,
            &ReconGrid {
                size: 64,
                extent: 3.0,
            },
        )
        .unwrap();
        assert!(r.resolution_warning.is_some());
    }

    proptest! {
        #[test]
        fn transform_is_even_in_direction(phi in 0.0..PI, p in -3.0..3.0f64) {
            let l = LineParam::planar(phi, p);
            let flipped = LineParam { theta: l.theta.iter().map(|c| -c).collect(), x: l.x.clone() };
            let f = gaussian([0.3, -0.2]);
            let (a, _) = xray_transform_scalar(&f, 3.0, &l).unwrap();
            let (b, _) = xray_transform_scalar(&f, 3.0, &flipped).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
