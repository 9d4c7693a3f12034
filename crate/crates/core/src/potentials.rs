//! Split force fields `F = F^l + F^s` with declared decay constants.
//!
//! A [`ForceField`] pairs a long-range potential `V^l` and a short-range
//! potential `V^s` (both smooth on all of ℝⁿ) with a [`DecayProfile`]
//! declaring the constants of the decay conditions
//!
//! ```text
//! |∂ʲ V^l(x)| ≤ β^l_|j|     (1+|x|)^-(α+|j|)
//! |∂ʲ V^s(x)| ≤ β^s_(|j|+1) (1+|x|)^-(α+1+|j|)      |j| ≤ 2
//! ```
//!
//! The constants are supplied by whoever builds the field and are checked by
//! sampling ([`verify_decay`]); the builtin families compute rigorous radial
//! bounds for themselves ([`declared_profile`]).

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, is_finite, norm};

/// Decay constants of a split field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayProfile {
    /// Spatial dimension `n ≥ 2`.
    pub dim: usize,
    /// Long-range decay rate, `0 < α ≤ 1`.
    pub alpha: f64,
    /// `(β₀ˡ, β₁ˡ, β₂ˡ)` for derivative orders 0, 1, 2 of `V^l`.
    pub beta_l: [f64; 3],
    /// `(β₁ˢ, β₂ˢ, β₃ˢ)` for derivative orders 0, 1, 2 of `V^s`.
    pub beta_s: [f64; 3],
}

impl DecayProfile {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Domain(format!(
                "dimension must be >= 2, got {}",
                self.dim
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self
            .beta_l
            .iter()
            .chain(&self.beta_s)
            .any(|b| !(b.is_finite() && *b >= 0.0))
        {
            return Err(Error::Domain(
                "decay constants must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn beta1_l(&self) -> f64 {
        self.beta_l[1]
    }

    pub fn beta2_l(&self) -> f64 {
        self.beta_l[2]
    }

    pub fn beta3_s(&self) -> f64 {
        self.beta_s[2]
    }

    /// `β₂ = max(β₂ˡ, β₂ˢ)`.
    pub fn beta2(&self) -> f64 {
        self.beta_l[2].max(self.beta_s[1])
    }

    /// `β = max(β₁ˡ, β₂ˡ, β₂ˢ, β₃ˢ)`, the constant entering the high-energy bounds.
    pub fn beta(&self) -> f64 {
        self.beta_l[1]
            .max(self.beta_l[2])
            .max(self.beta_s[1])
            .max(self.beta_s[2])
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// Same profile with every long-range constant multiplied by `c`.
    pub fn scale_long(&self, c: f64) -> Self {
        DecayProfile {
            beta_l: self.beta_l.map(|b| b * c),
            ..*self
        }
    }

    /// Same profile with every short-range constant multiplied by `c`.
    pub fn scale_short(&self, c: f64) -> Self {
        DecayProfile {
            beta_s: self.beta_s.map(|b| b * c),
            ..*self
        }
    }
}

/// Speed threshold `μ = √(2⁵ n max(β₁ˡ, β₂ˡ) / α)` above which the free
/// long-range flows exist.
pub fn mu_threshold(profile: &DecayProfile) -> Result<f64> {
    mu_of_sigma(profile, 0.0)
}

/// `μ(σ) = √(2⁵ n max(β₁ˡ, β₂ˡ) / (α (1 + σ/√2)^α))`.
pub fn mu_of_sigma(profile: &DecayProfile, sigma: f64) -> Result<f64> {
    if !(profile.alpha > 0.0) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {}",
            profile.alpha
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let b = profile.beta_l[1].max(profile.beta_l[2]);
    let a = profile.alpha;
    Ok((32.0 * profile.n() * b / (a * (1.0 + sigma / SQRT_2).powf(a))).sqrt())
}

/// Value, gradient and Hessian of a scalar potential at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `dim × dim`.
    pub hessian: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize) -> Self {
        Jet {
            value: 0.0,
            gradient: vec![0.0; dim],
            hessian: vec![0.0; dim * dim],
        }
    }

    fn accumulate(&mut self, other: &Jet) {
        self.value += other.value;
        for (a, b) in self.gradient.iter_mut().zip(&other.gradient) {
            *a += b;
        }
        for (a, b) in self.hessian.iter_mut().zip(&other.hessian) {
            *a += b;
        }
    }
}

/// Evaluator contract for one scalar potential. Implementations must be pure.
pub trait Potential: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `-∇V(x)` into `out`.
    fn force(&self, x: &[f64], out: &mut [f64]);
    /// Value, gradient and Hessian.
    fn jet(&self, x: &[f64]) -> Jet;
    /// True when the potential vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Builtin radial families. Every member is smooth on all of ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `c (1 + |x-x₀|²/ρ²)^(-decay/2)`. With `ρ` small and `decay = 1` this
    /// is a regularized Coulomb tail.
    PowerLaw {
        strength: f64,
        decay: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `c exp(-|x-x₀|²/w²)`.
    Gaussian {
        strength: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

impl Family {
    fn center(&self, dim: usize) -> Vec<f64> {
        let c = match self {
            Family::PowerLaw { center, .. } | Family::Gaussian { center, .. } => center,
        };
        c.clone().unwrap_or_else(|| vec![0.0; dim])
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let c = self.center(dim);
        if c.len() != dim || !is_finite(&c) {
            return Err(Error::Domain(format!(
                "center must be a finite {dim}-vector"
            )));
        }
        match *self {
            Family::PowerLaw {
                strength,
                decay,
                radius,
                ..
            } => {
                if !(strength.is_finite() && decay > 0.0 && radius > 0.0) {
                    return Err(Error::Domain(
                        "power law needs finite strength, decay > 0 and radius > 0".into(),
                    ));
                }
            }
            Family::Gaussian {
                strength, width, ..
            } => {
                if !(strength.is_finite() && width > 0.0) {
                    return Err(Error::Domain(
                        "gaussian needs finite strength and width > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Radial profile φ(r) and the two quantities bounding first and second
    /// partial derivatives: `|φ'(r)|` and `max(|φ''(r)|, |φ'(r)/r|)`.
    fn radial(&self, r: f64) -> [f64; 3] {
        match *self {
            Family::PowerLaw {
                strength: c,
                decay: a,
                radius: rho,
                ..
            } => {
                let u = 1.0 + r * r / (rho * rho);
                let base = c * a / (rho * rho) * u.powf(-0.5 * a - 1.0);
                let d1 = base * r;
                let d2 = base * (1.0 - (a + 2.0) * r * r / (rho * rho * u));
                [
                    (c * u.powf(-0.5 * a)).abs(),
                    d1.abs(),
                    d2.abs().max(base.abs()),
                ]
            }
            Family::Gaussian {
                strength: c,
                width: w,
                ..
            } => {
                let g = c * (-(r * r) / (w * w)).exp();
                let d1 = 2.0 * r / (w * w) * g;
                let d2 = g * (4.0 * r * r / w.powi(4) - 2.0 / (w * w));
                [g.abs(), d1.abs(), d2.abs().max((2.0 * g / (w * w)).abs())]
            }
        }
    }

    /// Asymptotic decay exponent of the potential itself.
    fn decay(&self) -> f64 {
        match *self {
            Family::PowerLaw { decay, .. } => decay,
            Family::Gaussian { .. } => f64::INFINITY,
        }
    }

    fn jet_into(&self, x: &[f64], center: &[f64], jet: &mut Jet) {
        let dim = x.len();
        let y: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        let r2 = dot(&y, &y);
        // V = c g(r²): ∇V = 2 c g' y, H = 2 c g' I + 4 c g'' y yᵀ
        let (value, g1, g2) = match *self {
            Family::PowerLaw {
                strength: c,
                decay: a,
                radius: rho,
                ..
            } => {
                let k = 1.0 / (rho * rho);
                let u = 1.0 + r2 * k;
                let v = c * u.powf(-0.5 * a);
                let g1 = -0.5 * a * k * c * u.powf(-0.5 * a - 1.0);
                let g2 = 0.5 * a * (0.5 * a + 1.0) * k * k * c * u.powf(-0.5 * a - 2.0);
                (v, g1, g2)
            }
            Family::Gaussian {
                strength: c,
                width: w,
                ..
            } => {
                let k = 1.0 / (w * w);
                let v = c * (-r2 * k).exp();
                (v, -k * v, k * k * v)
            }
        };
        jet.value += value;
        for i in 0..dim {
            jet.gradient[i] += 2.0 * g1 * y[i];
            for j in 0..dim {
                let delta = if i == j { 2.0 * g1 } else { 0.0 };
                jet.hessian[i * dim + j] += delta + 4.0 * g2 * y[i] * y[j];
            }
        }
    }

    fn force_into(&self, x: &[f64], center: &[f64], out: &mut [f64]) {
        let mut r2 = 0.0;
        for (a, b) in x.iter().zip(center) {
            r2 += (a - b) * (a - b);
        }
        let g1 = match *self {
            Family::PowerLaw {
                strength: c,
                decay: a,
                radius: rho,
                ..
            } => {
                let k = 1.0 / (rho * rho);
                -0.5 * a * k * c * (1.0 + r2 * k).powf(-0.5 * a - 1.0)
            }
            Family::Gaussian {
                strength: c,
                width: w,
                ..
            } => {
                let k = 1.0 / (w * w);
                -k * c * (-r2 * k).exp()
            }
        };
        for ((o, a), b) in out.iter_mut().zip(x).zip(center) {
            *o -= 2.0 * g1 * (a - b);
        }
    }
}

/// A finite sum of builtin family members in a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SumPotential {
    dim: usize,
    members: Vec<(Family, Vec<f64>)>,
}

impl SumPotential {
    pub fn new(dim: usize, members: Vec<Family>) -> Result<Self> {
        let mut out = Vec::with_capacity(members.len());
        for m in members {
            m.validate(dim)?;
            let c = m.center(dim);
            out.push((m, c));
        }
        Ok(SumPotential { dim, members: out })
    }

    pub fn zero(dim: usize) -> Self {
        SumPotential {
            dim,
            members: Vec::new(),
        }
    }

    pub fn members(&self) -> impl Iterator<Item = &Family> {
        self.members.iter().map(|(f, _)| f)
    }

    /// Smallest decay exponent among the members (∞ for the zero potential).
    pub fn decay(&self) -> f64 {
        self.members
            .iter()
            .map(|(f, _)| f.decay())
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bounds for `sup |∂ʲV| (1+|x|)^(exponent+|j|)`, `|j| = 0, 1, 2`,
    /// from the radial profiles and `1+|x| ≤ (1+|x₀|)(1+|x-x₀|)`.
    /// Returns an error if some member decays slower than `exponent`.
    pub fn radial_bounds(&self, exponent: f64) -> Result<[f64; 3]> {
        let mut total = [0.0; 3];
        let radii = bound_radii();
        for (member, center) in &self.members {
            if member.decay() < exponent - 1e-12 {
                return Err(Error::Domain(format!(
                    "member decays like r^-{} which is slower than the required r^-{}",
                    member.decay(),
                    exponent
                )));
            }
            let shift = 1.0 + norm(center);
            for (order, slot) in total.iter_mut().enumerate() {
                let p = exponent + order as f64;
                let sup = radii
                    .iter()
                    .map(|&r| member.radial(r)[order] * (1.0 + r).powf(p))
                    .fold(0.0, f64::max);
                *slot += sup * shift.powf(p);
            }
        }
        Ok(total)
    }
}

fn bound_radii() -> Vec<f64> {
    let mut r: Vec<f64> = (0..=8000).map(|k| k as f64 * 0.005).collect();
    r.extend((1..=3000).map(|k| 40.0 * 10f64.powf(k as f64 * 8.0 / 3000.0)));
    r
}

impl Potential for SumPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut jet = Jet::zero(self.dim);
        for (m, c) in &self.members {
            m.jet_into(x, c, &mut jet);
        }
        jet.value
    }

    fn force(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (m, c) in &self.members {
            m.force_into(x, c, out);
        }
    }

    fn jet(&self, x: &[f64]) -> Jet {
        let mut jet = Jet::zero(self.dim);
        for (m, c) in &self.members {
            let mut one = Jet::zero(self.dim);
            m.jet_into(x, c, &mut one);
            jet.accumulate(&one);
        }
        jet
    }

    fn is_zero(&self) -> bool {
        self.members.iter().all(|(m, _)| match m {
            Family::PowerLaw { strength, .. } | Family::Gaussian { strength, .. } => {
                *strength == 0.0
            }
        })
    }
}

/// `F = F^l + F^s` together with its declared decay constants.
#[derive(Debug, Clone)]
pub struct ForceField {
    long: Arc<dyn Potential>,
    short: Arc<dyn Potential>,
    profile: DecayProfile,
}

impl ForceField {
    pub fn new(
        long: Arc<dyn Potential>,
        short: Arc<dyn Potential>,
        profile: DecayProfile,
    ) -> Result<Self> {
        profile.validate()?;
        if long.dim() != profile.dim || short.dim() != profile.dim {
            return Err(Error::Domain(
                "potential dimensions disagree with the profile".into(),
            ));
        }
        Ok(ForceField {
            long,
            short,
            profile,
        })
    }

    /// Builds a field from builtin family members, declaring the constants
    /// from rigorous radial bounds (see [`declared_profile`]).
    pub fn from_families(
        dim: usize,
        alpha: f64,
        long: Vec<Family>,
        short: Vec<Family>,
    ) -> Result<Self> {
        let long = SumPotential::new(dim, long)?;
        let short = SumPotential::new(dim, short)?;
        let profile = declared_profile(dim, alpha, &long, &short)?;
        ForceField::new(Arc::new(long), Arc::new(short), profile)
    }

    /// The identically vanishing field in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        let profile = DecayProfile {
            dim,
            alpha: 1.0,
            beta_l: [0.0; 3],
            beta_s: [0.0; 3],
        };
        ForceField::new(
            Arc::new(SumPotential::zero(dim)),
            Arc::new(SumPotential::zero(dim)),
            profile,
        )
        .expect("zero field is valid")
    }

    pub fn dim(&self) -> usize {
        self.profile.dim
    }

    pub fn profile(&self) -> &DecayProfile {
        &self.profile
    }

    /// Replaces the declared constants, e.g. with hand-supplied values.
    pub fn with_profile(&self, profile: DecayProfile) -> Result<Self> {
        ForceField::new(self.long.clone(), self.short.clone(), profile)
    }

    pub fn long(&self) -> &Arc<dyn Potential> {
        &self.long
    }

    pub fn short(&self) -> &Arc<dyn Potential> {
        &self.short
    }

    /// The field with the short-range part removed.
    pub fn long_only(&self) -> ForceField {
        ForceField {
            long: self.long.clone(),
            short: Arc::new(SumPotential::zero(self.dim())),
            profile: DecayProfile {
                beta_s: [0.0; 3],
                ..self.profile
            },
        }
    }

    pub fn has_long(&self) -> bool {
        !self.long.is_zero()
    }

    pub fn has_short(&self) -> bool {
        !self.short.is_zero()
    }

    pub fn force_long(&self, x: &[f64], out: &mut [f64]) {
        self.long.force(x, out);
    }

    pub fn force_short(&self, x: &[f64], out: &mut [f64]) {
        self.short.force(x, out);
    }

    /// Total force `F(x)`.
    pub fn force(&self, x: &[f64], out: &mut [f64]) {
        self.long.force(x, out);
        let mut tmp = [0.0; 8];
        let tmp = &mut tmp[..x.len()];
        self.short.force(x, tmp);
        for (o, t) in out.iter_mut().zip(tmp.iter()) {
            *o += t;
        }
    }

    /// `(F^l(x), F^s(x))`, rejecting non-finite input.
    pub fn eval_split_force(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point has {} components, field lives in {} dimensions",
                x.len(),
                self.dim()
            )));
        }
        if !is_finite(x) {
            return Err(Error::Domain("non-finite evaluation point".into()));
        }
        let mut fl = vec![0.0; x.len()];
        let mut fs = vec![0.0; x.len()];
        self.long.force(x, &mut fl);
        self.short.force(x, &mut fs);
        Ok((fl, fs))
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.long.value(x) + self.short.value(x)
    }

    /// `E = |ẋ|²/2 + V(x)`, conserved along solutions of `ẍ = F(x)`.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        0.5 * dot(v, v) + self.potential(x)
    }
}

/// Declared constants for builtin sums: radial suprema of each member,
/// shifted to the origin and summed, with a 2% allowance for the sampling
/// of the radial profile.
pub fn declared_profile(
    dim: usize,
    alpha: f64,
    long: &SumPotential,
    short: &SumPotential,
) -> Result<DecayProfile> {
    let bl = long.radial_bounds(alpha)?;
    let bs = short.radial_bounds(alpha + 1.0)?;
    let profile = DecayProfile {
        dim,
        alpha,
        beta_l: bl.map(|b| 1.02 * b),
        beta_s: bs.map(|b| 1.02 * b),
    };
    profile.validate()?;
    Ok(profile)
}

/// The demonstration field used by examples and acceptance tests:
/// a regularized Coulomb-like tail `0.2 (1+|x|²)^(-1/2)` plus a Gaussian
/// bump `0.05 exp(-|x-x₀|²)` centered at `x₀ = (0.3, -0.2)`.
pub fn demo_field() -> ForceField {
    ForceField::from_families(
        2,
        1.0,
        vec![Family::PowerLaw {
            strength: 0.2,
            decay: 1.0,
            radius: 1.0,
            center: None,
        }],
        vec![Family::Gaussian {
            strength: 0.05,
            width: 1.0,
            center: Some(vec![0.3, -0.2]),
        }],
    )
    .expect("demo field is valid")
}

/// Outcome of [`verify_decay`] for one potential part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `max |∂ʲV|(1+|x|)^p / β` per derivative order 0, 1, 2 for `V^l`.
    pub long_ratios: [f64; 3],
    /// Same for `V^s`.
    pub short_ratios: [f64; 3],
    pub samples: usize,
    pub pass: bool,
}

/// Samples both potentials on log-spaced radii up to `radius_max` in
/// uniformly spread directions and reports the largest observed ratio of
/// each derivative order to its declared bound.
pub fn verify_decay(field: &ForceField, sample_count: usize, radius_max: f64) -> DecayReport {
    let profile = field.profile;
    let dim = field.dim();
    let points = decay_samples(dim, sample_count.max(1), radius_max);
    let mut long = [0.0f64; 3];
    let mut short = [0.0f64; 3];
    for x in &points {
        let w = 1.0 + norm(x);
        let jl = field.long.jet(x);
        let js = field.short.jet(x);
        for order in 0..3 {
            let pl = profile.alpha + order as f64;
            let ps = profile.alpha + 1.0 + order as f64;
            let ml = jet_order_max(&jl, order);
            let ms = jet_order_max(&js, order);
            long[order] = long[order].max(ratio(ml * w.powf(pl), profile.beta_l[order]));
            short[order] = short[order].max(ratio(ms * w.powf(ps), profile.beta_s[order]));
        }
    }
    let pass = long.iter().chain(&short).all(|r| *r <= 1.0);
    DecayReport {
        long_ratios: long,
        short_ratios: short,
        samples: points.len(),
        pass,
    }
}

fn ratio(value: f64, bound: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else if bound == 0.0 {
        f64::INFINITY
    } else {
        value / bound
    }
}

/// Largest `|∂ʲV|` over multi-indices with `|j| = order`.
fn jet_order_max(jet: &Jet, order: usize) -> f64 {
    match order {
        0 => jet.value.abs(),
        1 => jet.gradient.iter().fold(0.0, |m, g| m.max(g.abs())),
        _ => jet.hessian.iter().fold(0.0, |m, g| m.max(g.abs())),
    }
}

fn decay_samples(dim: usize, count: usize, radius_max: f64) -> Vec<Vec<f64>> {
    let radii = count.max(2);
    let dirs = directions(dim, 64);
    let mut out = vec![vec![0.0; dim]];
    let r_min: f64 = 1e-3;
    let r_max = radius_max.max(r_min * 10.0);
    for k in 0..radii {
        let r = r_min * (r_max / r_min).powf(k as f64 / (radii - 1) as f64);
        for d in &dirs {
            out.push(d.iter().map(|c| c * r).collect());
        }
    }
    out
}

/// Deterministic, roughly uniform unit vectors: the circle for `n = 2`,
/// a Fibonacci sphere for `n = 3`, and axis/diagonal directions beyond.
fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match dim {
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![rho * a.cos(), rho * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut out = Vec::new();
            for i in 0..dim {
                for s in [-1.0, 1.0] {
                    let mut v = vec![0.0; dim];
                    v[i] = s;
                    out.push(v);
                }
            }
            let d = 1.0 / (dim as f64).sqrt();
            out.push(vec![d; dim]);
            out.push(vec![-d; dim]);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_power_law() -> SumPotential {
        SumPotential::new(
            2,
            vec![Family::PowerLaw {
                strength: 1.0,
                decay: 1.0,
                radius: 1.0,
                center: None,
            }],
        )
        .unwrap()
    }

    fn profile(beta: f64, alpha: f64, dim: usize) -> DecayProfile {
        DecayProfile {
            dim,
            alpha,
            beta_l: [beta; 3],
            beta_s: [beta; 3],
        }
    }

    #[test]
    fn gaussian_force_vanishes_at_its_center() {
        let field = ForceField::from_families(
            2,
            1.0,
            vec![],
            vec![Family::Gaussian {
                strength: 1.0,
                width: 1.0,
                center: None,
            }],
        )
        .unwrap();
        let (fl, fs) = field.eval_split_force(&[0.0, 0.0]).unwrap();
        assert_eq!(fl, vec![0.0, 0.0]);
        assert_eq!(fs, vec![0.0, 0.0]);
    }

    #[test]
    fn power_law_force_matches_hand_derivative() {
        let p = unit_power_law();
        let mut f = [0.0; 2];
        p.force(&[1.0, 0.0], &mut f);
        assert_relative_eq!(f[0], 2f64.powf(-1.5), max_relative = 1e-15);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn non_finite_points_are_rejected() {
        let field = demo_field();
        assert!(matches!(
            field.eval_split_force(&[f64::NAN, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(field.eval_split_force(&[1.0]).is_err());
    }

    #[test]
    fn mu_threshold_examples() {
        assert_relative_eq!(
            mu_threshold(&profile(1.0, 1.0, 2)).unwrap(),
            8.0,
            max_relative = 1e-15
        );
        assert_eq!(mu_threshold(&profile(0.0, 1.0, 2)).unwrap(), 0.0);
        assert_relative_eq!(
            mu_threshold(&profile(1.0, 0.5, 3)).unwrap(),
            192f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            mu_of_sigma(&profile(1.0, 1.0, 2), SQRT_2).unwrap(),
            32f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn mu_of_sigma_is_decreasing_and_starts_at_mu() {
        let p = profile(1.0, 1.0, 2);
        let m: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&s| mu_of_sigma(&p, s).unwrap())
            .collect();
        assert_eq!(m[0], mu_threshold(&p).unwrap());
        assert!(m[0] > m[1] && m[1] > m[2]);
    }

    #[test]
    fn mu_rejects_bad_arguments() {
        let mut p = profile(1.0, 1.0, 2);
        assert!(mu_of_sigma(&p, -0.1).is_err());
        p.alpha = 0.0;
        assert!(mu_threshold(&p).is_err());
    }

    #[test]
    fn regularized_power_law_needs_sqrt2_for_order_zero() {
        // (1+|y|²)^(-1/2)(1+|y|) peaks at √2 for |y| = 1, so β₀ˡ = 1 is too small
        let long = unit_power_law();
        let mk = |b0: f64| {
            ForceField::new(
                Arc::new(long.clone()),
                Arc::new(SumPotential::zero(2)),
                DecayProfile {
                    dim: 2,
                    alpha: 1.0,
                    beta_l: [b0, 10.0, 10.0],
                    beta_s: [0.0; 3],
                },
            )
            .unwrap()
        };
        let report = verify_decay(&mk(2f64.sqrt() * 1.0000001), 200, 1e4);
        assert!(report.long_ratios[0] <= 1.0);
        assert!(report.long_ratios[0] > 0.999);
        let report = verify_decay(&mk(1.0), 200, 1e4);
        assert!(report.long_ratios[0] > 1.4);
        assert!(!report.pass);
    }

    #[test]
    fn zero_field_reports_zero_ratios() {
        let report = verify_decay(&ForceField::zero(3), 50, 100.0);
        assert!(report.pass);
        assert_eq!(report.long_ratios, [0.0; 3]);
        assert_eq!(report.short_ratios, [0.0; 3]);
    }

    #[test]
    fn gaussian_with_small_declared_beta_fails() {
        let field = ForceField::from_families(
            2,
            1.0,
            vec![],
            vec![Family::Gaussian {
                strength: 1.0,
                width: 1.0,
                center: Some(vec![1.0, 0.0]),
            }],
        )
        .unwrap();
        assert!(verify_decay(&field, 100, 50.0).pass);
        let weak = field
            .with_profile(field.profile().scale_short(0.25))
            .unwrap();
        let report = verify_decay(&weak, 100, 50.0);
        assert!(!report.pass);
        assert!(report.short_ratios.iter().any(|r| *r > 1.0));
    }

    #[test]
    fn builtin_fields_pass_their_declared_profiles() {
        let fields = [demo_field(), ForceField::zero(2)];
        for f in &fields {
            assert!(
                verify_decay(f, 400, 1e6).pass,
                "{:?}",
                verify_decay(f, 400, 1e6)
            );
        }
    }

    #[test]
    fn slow_short_range_member_is_refused() {
        let res = ForceField::from_families(
            2,
            1.0,
            vec![],
            vec![Family::PowerLaw {
                strength: 1.0,
                decay: 1.0,
                radius: 1.0,
                center: None,
            }],
        );
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    fn central_difference_error(field: &ForceField, x: &[f64]) -> f64 {
        let n = x.len();
        let mut f = vec![0.0; n];
        field.force(x, &mut f);
        let mut fd = vec![0.0; n];
        for k in 0..n {
            let h = 1e-5 * (1.0 + x[k].abs());
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            fd[k] = -(field.potential(&p) - field.potential(&m)) / (2.0 * h);
        }
        let diff = f
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / scale.max(1e-3)
    }

    proptest::proptest! {
        #[test]
        fn force_is_minus_gradient_of_potential(
            x in proptest::collection::vec(-6.0f64..6.0, 2),
            strength in -3.0f64..3.0,
            decay in 0.3f64..2.5,
            radius in 0.3f64..2.0,
            width in 0.3f64..2.0,
        ) {
            let field = ForceField::from_families(
                2,
                decay.min(1.0),
                vec![Family::PowerLaw { strength, decay, radius, center: Some(vec![0.4, -0.2]) }],
                vec![Family::Gaussian { strength: -strength, width, center: Some(vec![-0.3, 0.1]) }],
            )
            .unwrap();
            proptest::prop_assert!(central_difference_error(&field, &x) <= 1e-6);
            proptest::prop_assert!(central_difference_error(&demo_field(), &x) <= 1e-6);
        }
    }

    #[test]
    fn energy_is_kinetic_plus_potential() {
        let field = demo_field();
        let x = [0.3, 0.7];
        let v = [1.0, -2.0];
        assert_relative_eq!(
            field.energy(&x, &v),
            2.5 + field.potential(&x),
            max_relative = 1e-15
        );
    }
}
