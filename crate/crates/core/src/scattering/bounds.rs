//! Closed-form constants of the contraction framework and the explicit
//! estimates on scattering solutions and data.
//!
//! Throughout, `q = |v₋|/2^{3/2} - r`. Any formula whose base becomes
//! nonpositive for the given `r` evaluates to `+∞`, so that comparisons of
//! the form `lhs ≤ rhs` or `rho ≤ r` fail cleanly instead of producing NaN.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::DecayProfile;

const TWO_3_2: f64 = 2.0 * SQRT_2;

fn pos_pow(base: f64, e: f64) -> f64 {
    if base > 0.0 {
        base.powf(e)
    } else {
        0.0
    }
}

/// `num / den`, with `+∞` for a nonpositive denominator.
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Contraction constants for a given `(|x₋|, |v₋|, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub r: f64,
    /// Bound on `‖A f‖` for `f ∈ M_r`.
    pub rho: f64,
    /// Contraction factor shared by all three operators.
    pub lambda: f64,
    /// Bound on `‖𝒜 f‖` for the modified operator.
    pub rho_tilde: f64,
    /// Left side of the smallness condition under which the outgoing
    /// breakdown terms are controlled (must be ≤ 1).
    pub breakdown_smallness: f64,
    /// Left side of the smallness condition of the modified map (must be ≤ 1).
    pub modified_smallness: f64,
}

/// Evaluates `ρ`, `λ`, `ρ̃` and the two smallness left sides.
pub fn bound_constants(
    profile: &DecayProfile,
    x_norm: f64,
    v_norm: f64,
    r: f64,
) -> Result<BoundConstants> {
    let upper = (v_norm / TWO_3_2).max(1.0 + x_norm / SQRT_2);
    if !(r > 0.0 && r < upper) {
        return Err(Error::Domain(format!(
            "r = {r} must lie in (0, {upper:.6e}) = (0, max(|v|/2^(3/2), 1+|x|/sqrt2))"
        )));
    }
    let n = profile.n();
    let a = profile.alpha;
    let b2 = profile.beta2();
    let b3 = profile.beta3_s();
    let b1l = profile.beta1_l();
    let q = v_norm / TWO_3_2 - r;
    let one_r = 1.0 - r;
    let big_x = 1.0 - r + x_norm / SQRT_2;

    let rho = if b2 == 0.0 {
        0.0
    } else {
        ratio(
            b2 * (n * (3.0 * x_norm + 2.0 * r) + 2.0 * n.sqrt()),
            q * pos_pow(one_r, a),
        ) * (ratio(2.0, a * q) + ratio(1.0, (a + 1.0) * one_r))
    };
    let lambda = if b2 == 0.0 && b3 == 0.0 {
        0.0
    } else {
        ratio(2.0 * n, a * q * pos_pow(big_x, a))
            * (b2 + ratio(b3, big_x) + ratio(b3, q))
            * (ratio(1.0, big_x) + ratio(1.0, q))
    };
    let rho_tilde = if b2 == 0.0 {
        0.0
    } else {
        ratio(
            2.0 * b2 * n.sqrt() * (n.sqrt() * r + 1.0),
            q * pos_pow(big_x, a),
        ) * (ratio(1.0, (a + 1.0) * big_x) + ratio(2.0, a * q))
    };
    let bm = b1l.max(b2);
    let breakdown_smallness = if bm == 0.0 {
        0.0
    } else {
        ratio(8.0 * n * bm, a * q * q * pos_pow(one_r, a + 1.0))
    };
    let half = 0.5 + x_norm / TWO_3_2 - r;
    let modified_smallness = if bm == 0.0 {
        0.0
    } else {
        ratio(20.0 * n * bm, a * q * q * pos_pow(half, a))
    };
    Ok(BoundConstants {
        r,
        rho,
        lambda,
        rho_tilde,
        breakdown_smallness,
        modified_smallness,
    })
}

/// Which high-energy threshold to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdVariant {
    /// Threshold for the standard scattering data, `r ∈ (0, 1)`.
    S0,
    /// Threshold for the modified scattering data, `r ∈ (0, 1/2 + σ/2^{3/2})`.
    S0Tilde,
}

/// The threshold equation written as `1 = K (1 + 1/q)² / q`, `q = s/2^{3/2} - r`.
fn threshold_coefficient(
    sigma: f64,
    r: f64,
    beta: f64,
    alpha: f64,
    variant: ThresholdVariant,
    n: usize,
) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "|x| must be nonnegative, got {sigma}"
        )));
    }
    let n = n as f64;
    match variant {
        ThresholdVariant::S0 => {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Domain(format!("r = {r} must lie in (0, 1)")));
            }
            Ok(4.0 * beta * n * (sigma + 1.0) / (alpha * r * (1.0 - r).powf(alpha + 2.0)))
        }
        ThresholdVariant::S0Tilde => {
            let top = 0.5 + sigma / TWO_3_2;
            if !(r > 0.0 && r < top) {
                return Err(Error::Domain(format!("r = {r} must lie in (0, {top})")));
            }
            Ok(12.0 * beta * n / (alpha * r * (top - r).powf(alpha)))
        }
    }
}

/// Right side of the threshold equation at speed `s` (decreasing in `s`).
pub fn threshold_rhs(
    sigma: f64,
    r: f64,
    beta: f64,
    alpha: f64,
    variant: ThresholdVariant,
    n: usize,
    s: f64,
) -> Result<f64> {
    let k = threshold_coefficient(sigma, r, beta, alpha, variant, n)?;
    let q = s / TWO_3_2 - r;
    if q <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(k * (1.0 + 1.0 / q).powi(2) / q)
}

/// The speed above which the theorem estimates hold: the unique root
/// `s > 2^{3/2} r` of `threshold_rhs(s) = 1`, found by bisection.
pub fn s_threshold(
    sigma: f64,
    r: f64,
    beta: f64,
    alpha: f64,
    variant: ThresholdVariant,
    n: usize,
) -> Result<f64> {
    let k = threshold_coefficient(sigma, r, beta, alpha, variant, n)?;
    // g(q) = K(1+1/q)²/q - 1 decreases from +∞ to -1 on (0, ∞)
    let g = |q: f64| k * (1.0 + 1.0 / q).powi(2) / q - 1.0;
    let mut lo = f64::MIN_POSITIVE.sqrt();
    let mut hi = 1.0;
    let mut guard = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::Numeric(
                "no bracketing interval for the threshold equation".into(),
            ));
        }
    }
    if g(lo) <= 0.0 {
        return Err(Error::Numeric(
            "no bracketing interval for the threshold equation".into(),
        ));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(TWO_3_2 * (q + r))
}

/// Closed-form estimates of the standard scattering solution for fixed
/// `(|x₋|, |v₋|, r)`; each returns the right side of an inequality.
#[derive(Debug, Clone, Copy)]
pub struct StandardEstimates {
    n: f64,
    a: f64,
    b1l: f64,
    b2: f64,
    b3: f64,
    x: f64,
    v: f64,
    r: f64,
    q: f64,
}

impl StandardEstimates {
    pub fn new(profile: &DecayProfile, x_norm: f64, v_norm: f64, r: f64) -> Self {
        StandardEstimates {
            n: profile.n(),
            a: profile.alpha,
            b1l: profile.beta1_l(),
            b2: profile.beta2(),
            b3: profile.beta3_s(),
            x: x_norm,
            v: v_norm,
            r,
            q: v_norm / TWO_3_2 - r,
        }
    }

    fn k(&self) -> f64 {
        self.b2 * (self.n * (self.x + self.r) + self.n.sqrt())
    }

    /// `|ẏ₋(t)|` for `t ≤ 0`.
    pub fn incoming_velocity(&self, t: f64) -> f64 {
        let d = 1.0 - self.r + t.abs() * self.q;
        ratio(self.k(), (self.a + 1.0) * self.q * pos_pow(d, self.a + 1.0))
    }

    /// `|y₋(t)|` for `t ≤ 0`.
    pub fn incoming_deviation(&self, t: f64) -> f64 {
        let d = 1.0 - self.r + t.abs() * self.q;
        ratio(
            self.k(),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(d, self.a),
        )
    }

    /// `|a_sc|`.
    pub fn velocity_deflection(&self) -> f64 {
        let c = 1.0 + self.x / SQRT_2 - self.r;
        ratio(2.0 * self.n.sqrt(), self.q * pos_pow(c, self.a))
            * (self.b1l / self.a + ratio(self.b2, (self.a + 1.0) * c))
    }

    /// `|l|`.
    pub fn shift_l(&self) -> f64 {
        ratio(
            self.b2 * self.n.sqrt() * (self.n.sqrt() * (self.x + self.r) + 2.0),
            self.a * (self.a + 1.0) * pos_pow(1.0 - self.r, self.a) * self.q * self.q,
        )
    }

    fn bm(&self) -> f64 {
        self.b2.max(self.b3)
    }

    /// `|a_sc - ∫F(z₋(v₋,τ) + x₋) dτ|`.
    pub fn velocity_linearization(&self) -> f64 {
        ratio(
            4.0 * self.bm().powi(2)
                * self.n.powf(1.5)
                * (self.n.sqrt() * (3.0 * self.x + 2.0 * self.r) + 2.0),
            self.a * self.a * self.q * self.q * pos_pow(1.0 - self.r, 2.0 * self.a + 3.0),
        ) * (ratio(1.0, self.q) + 1.0).powi(2)
    }

    /// `|l(y₋) - l(0)|`.
    pub fn shift_linearization(&self) -> f64 {
        ratio(
            4.0 * self.bm().powi(2)
                * self.n.powf(1.5)
                * (self.n.sqrt() * (3.0 * self.x + 2.0 * self.r) + 2.0),
            self.a
                * self.a
                * (self.a + 1.0)
                * self.q.powi(3)
                * pos_pow(1.0 - self.r, 2.0 * self.a + 2.0),
        ) * (ratio(1.0, self.q) + 1.0).powi(2)
    }

    /// `|l₁|` (valid under the breakdown smallness condition).
    pub fn shift_l1(&self) -> f64 {
        ratio(
            8.0 * self.b2 * self.n * self.x,
            self.a * (self.a + 1.0) * self.v * self.v,
        )
    }

    /// `|l₂|` (valid under the breakdown smallness condition).
    pub fn shift_l2(&self) -> f64 {
        ratio(
            2.0 * self.n.powf(1.5)
                * self.b2
                * self.b2
                * (self.n.sqrt() * (2.0 * self.x + self.r) + 3.0),
            self.a.powi(2)
                * (self.a + 1.0).powi(2)
                * pos_pow(1.0 - self.r, 2.0 * self.a)
                * self.q.powi(4),
        )
    }

    /// `|y₊(t)|` for `t ≥ 0` (valid under the breakdown smallness condition).
    pub fn outgoing_deviation(&self, t: f64) -> f64 {
        let d = 1.0 - self.r + self.x / SQRT_2 + t * self.q;
        let extra = 1.0
            + ratio(
                2.0 * self.n * self.b2 * (self.n.sqrt() * (2.0 * self.x + self.r) + 3.0),
                self.a * (self.a + 1.0) * self.q * self.q * pos_pow(1.0 - self.r, self.a),
            );
        ratio(
            2.0 * self.n.sqrt() * self.b2,
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(d, self.a),
        ) * extra
    }
}

/// Closed-form estimates of the modified scattering solution.
#[derive(Debug, Clone, Copy)]
pub struct ModifiedEstimates {
    n: f64,
    a: f64,
    b1l: f64,
    b2: f64,
    b3: f64,
    x: f64,
    r: f64,
    q: f64,
}

impl ModifiedEstimates {
    pub fn new(profile: &DecayProfile, x_norm: f64, v_norm: f64, r: f64) -> Self {
        ModifiedEstimates {
            n: profile.n(),
            a: profile.alpha,
            b1l: profile.beta1_l(),
            b2: profile.beta2(),
            b3: profile.beta3_s(),
            x: x_norm,
            r,
            q: v_norm / TWO_3_2 - r,
        }
    }

    fn k(&self) -> f64 {
        self.b2 * (self.n * self.r + self.n.sqrt())
    }

    fn c(&self) -> f64 {
        1.0 + self.x / SQRT_2 - self.r
    }

    fn half(&self) -> f64 {
        0.5 + self.x / TWO_3_2 - self.r
    }

    pub fn incoming_velocity(&self, t: f64) -> f64 {
        let d = self.c() + t.abs() * self.q;
        ratio(self.k(), (self.a + 1.0) * self.q * pos_pow(d, self.a + 1.0))
    }

    pub fn incoming_deviation(&self, t: f64) -> f64 {
        let d = self.c() + t.abs() * self.q;
        ratio(
            self.k(),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(d, self.a),
        )
    }

    /// `|ã_sc|`.
    pub fn velocity_deflection(&self) -> f64 {
        ratio(
            6.0 * self.n.sqrt() * self.b1l.max(self.b2),
            self.a * self.q * pos_pow(self.c(), self.a),
        )
    }

    /// `|b̃_sc|`.
    pub fn position_deflection(&self) -> f64 {
        ratio(
            4.0 * self.k(),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(self.half(), self.a),
        )
    }

    /// `|y₊(t)|` for `t ≥ 0`.
    pub fn outgoing_deviation(&self, t: f64) -> f64 {
        let d = self.half() + t * self.q;
        ratio(
            2.0 * self.b2 * self.n.sqrt(),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(d, self.a),
        )
    }

    fn bm(&self) -> f64 {
        self.b2.max(self.b3)
    }

    /// `|ã_sc - W̃ - ∫F^s(z₋(v₋,x₋,τ)) dτ|`.
    pub fn velocity_linearization(&self) -> f64 {
        let big_x = 1.0 - self.r + self.x / SQRT_2;
        ratio(
            4.0 * self.bm().powi(2) * self.n * (self.n * self.r + self.n.sqrt()),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(big_x, 2.0 * self.a + 1.0),
        ) * (3.0 + ratio(2.0, self.q)).powi(2)
    }

    /// `|b̃_sc - l̃(0)|`.
    pub fn position_linearization(&self) -> f64 {
        ratio(
            10.0 * self.n * (self.n * self.r + self.n.sqrt()) * self.bm().powi(2),
            self.a * self.a * (self.a + 1.0) * self.q.powi(3) * pos_pow(self.c(), 2.0 * self.a),
        ) * (3.0 + ratio(1.0, self.q)).powi(2)
    }

    /// Bound on `|𝒢(h)|` over the ball.
    pub fn g_bound(&self) -> f64 {
        ratio(
            self.b2 * (6.0 * (self.n * self.r + self.n.sqrt()) + self.n * (1.0 + self.x / SQRT_2)),
            2.0 * self.a * (self.a + 1.0) * self.q * self.q * pos_pow(self.half(), self.a),
        )
    }
}

/// Lipschitz constant of `𝒢` in `h` from the closed form (≤ 1/10 under the
/// modified smallness condition).
pub fn g_lipschitz_bound(profile: &DecayProfile, x_norm: f64, v_norm: f64) -> f64 {
    let a = profile.alpha;
    ratio(
        16.0 * profile.n() * profile.beta2_l(),
        a * (a + 1.0) * v_norm * v_norm * pos_pow(0.5 + x_norm / TWO_3_2, a),
    )
}

/// Right sides of the four Born-type inequalities along the line
/// `τ ↦ τsθ + x`, with `β = max(β₁ˡ, β₂ˡ, β₂ˢ, β₃ˢ)`.
#[derive(Debug, Clone, Copy)]
pub struct BornBounds {
    n: f64,
    a: f64,
    beta: f64,
    x: f64,
    r: f64,
    q: f64,
}

impl BornBounds {
    pub fn new(profile: &DecayProfile, x_norm: f64, s: f64, r: f64) -> Self {
        BornBounds {
            n: profile.n(),
            a: profile.alpha,
            beta: profile.beta(),
            x: x_norm,
            r,
            q: s / TWO_3_2 - r,
        }
    }

    /// `|a_sc - ∫F(τsθ+x) dτ|`.
    pub fn velocity(&self) -> f64 {
        ratio(
            4.0 * self.n * self.n * (3.0 * self.x + 5.0) * self.beta.powi(2),
            self.a * self.a * pos_pow(1.0 - self.r, 2.0 * self.a + 3.0) * self.q * self.q,
        ) * (1.0 + ratio(1.0, self.q)).powi(2)
    }

    /// `|b_sc - W - ∫∫₋F^s + ∫∫₊F^s|`.
    pub fn position(&self) -> f64 {
        ratio(
            4.0 * self.n * self.n * (3.0 * self.x + 5.0) * self.beta.powi(2),
            self.a * self.a * pos_pow(1.0 - self.r, 2.0 * self.a + 2.0) * self.q.powi(3),
        ) * (1.0 + ratio(1.0, self.q)).powi(2)
    }

    /// `|ã_sc - W̃ - ∫F^s(τsθ+x) dτ|`.
    pub fn modified_velocity(&self) -> f64 {
        let big_x = 1.0 - self.r + self.x / SQRT_2;
        ratio(
            12.0 * self.n * self.n * self.beta.powi(2),
            self.a * (self.a + 1.0) * self.q * self.q * pos_pow(big_x, 2.0 * self.a + 1.0),
        ) * (3.0 + ratio(2.0, self.q)).powi(2)
    }

    /// `|b̃_sc - ∫∫₋F^s + ∫∫₊F^s|`.
    pub fn modified_position(&self) -> f64 {
        let big_x = 1.0 - self.r + self.x / SQRT_2;
        ratio(
            24.0 * self.n * self.n * self.beta.powi(2),
            self.a * self.a * (self.a + 1.0) * self.q.powi(3) * pos_pow(big_x, 2.0 * self.a),
        ) * (3.0 + ratio(1.0, self.q)).powi(2)
    }
}
