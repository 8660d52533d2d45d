//! First-order upper and lower bounds for `p_ε(A)` on a bounded interval
//! `A = (a⁻, a⁺)`, anchored at a point `x ∈ A`.

use std::fmt;

use libm::erfc;

use crate::error::{Error, Result};
use crate::legendre::RateData;

/// Points scanned on each side of `A` when searching the complement.
const GAP_SCAN: usize = 64;
/// A gap at or below this counts as vanished.
const GAP_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

/// Which side of zero the critical point `u*(x)` falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    NonNegative,
    Negative,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        })
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::NonNegative => "ustar>=0",
            CaseTag::Negative => "ustar<0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub direction: Direction,
    pub case: CaseTag,
    pub x: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub ustar: f64,
    /// Coefficient of `-1/ε` in the exponent.
    pub exponent: f64,
    /// `exp(Λ⁽¹⁾(u*(x)))`.
    pub prefactor: f64,
    /// `Λ⁽²⁾(u*(x))`.
    pub correction: f64,
    /// `γ_A`; zero for upper bounds.
    pub gap_gamma: f64,
}

impl BoundReport {
    pub fn value(&self, eps: f64) -> f64 {
        let base = (-self.exponent / eps).exp() * self.prefactor * (1.0 + eps * self.correction);
        match self.direction {
            Direction::Upper => base,
            Direction::Lower => base * -(-self.gap_gamma / eps).exp_m1(),
        }
    }
}

fn check_set(a: (f64, f64), x: f64) -> Result<()> {
    let (lo, hi) = a;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Domain(format!("set ({lo}, {hi}) must be bounded and ordered")));
    }
    if !(lo <= x && x <= hi) {
        return Err(Error::Domain(format!("x = {x} not in [{lo}, {hi}]")));
    }
    Ok(())
}

struct Anchor {
    ustar: f64,
    rate: f64,
    prefactor: f64,
    correction: f64,
}

fn anchor(rd: &RateData, x: f64) -> Result<Anchor> {
    let ustar = rd.ustar(x)?;
    let cgf = rd.cgf();
    if !cgf.contains(ustar) {
        return Err(Error::Domain(format!("u*({x}) = {ustar} outside the CGF domain")));
    }
    Ok(Anchor {
        ustar,
        rate: rd.rate_at(x, ustar),
        prefactor: cgf.lambda1.eval(ustar).exp(),
        correction: cgf.lambda2.eval(ustar),
    })
}

fn case_of(ustar: f64) -> CaseTag {
    if ustar >= 0.0 {
        CaseTag::NonNegative
    } else {
        CaseTag::Negative
    }
}

pub fn upper_bound(rd: &RateData, a: (f64, f64), x: f64) -> Result<BoundReport> {
    check_set(a, x)?;
    let an = anchor(rd, x)?;
    let case = case_of(an.ustar);
    let xi = match case {
        CaseTag::NonNegative => a.1,
        CaseTag::Negative => a.0,
    };
    Ok(BoundReport {
        direction: Direction::Upper,
        case,
        x,
        a_minus: a.0,
        a_plus: a.1,
        ustar: an.ustar,
        exponent: an.rate - an.ustar * (xi - x),
        prefactor: an.prefactor,
        correction: an.correction,
        gap_gamma: 0.0,
    })
}

pub fn lower_bound(rd: &RateData, a: (f64, f64), x: f64) -> Result<BoundReport> {
    check_set(a, x)?;
    let (_, gamma) = gap_constant(rd, a, x)?;
    let an = anchor(rd, x)?;
    let case = case_of(an.ustar);
    let w = match case {
        CaseTag::NonNegative => x - a.0,
        CaseTag::Negative => a.1 - x,
    };
    Ok(BoundReport {
        direction: Direction::Lower,
        case,
        x,
        a_minus: a.0,
        a_plus: a.1,
        ustar: an.ustar,
        exponent: an.rate + an.ustar.abs() * w,
        prefactor: an.prefactor,
        correction: an.correction,
        gap_gamma: gamma,
    })
}

/// Rate of the measure tilted by `u*(x)`: `rate(y) - rate(x) + u*(x)(y - x)`.
pub fn tilted_rate(rd: &RateData, x: f64, y: f64) -> Result<f64> {
    let u = rd.ustar(x)?;
    Ok(rd.rate(y)? - rd.rate_at(x, u) + u * (y - x))
}

/// `(δ_A, γ_A)` with `δ_A` the infimum of the tilted rate over the
/// complement of `A` and `γ_A = δ_A / 2`.
pub fn gap_constant(rd: &RateData, a: (f64, f64), x: f64) -> Result<(f64, f64)> {
    check_set(a, x)?;
    let (lo, hi) = a;
    let width = (hi - lo).max(f64::EPSILON);
    let mut delta = tilted_rate(rd, x, lo)?.min(tilted_rate(rd, x, hi)?);
    for j in 1..=GAP_SCAN {
        let s = width * j as f64 / GAP_SCAN as f64;
        for y in [lo - s, hi + s] {
            // Points outside the reach of u* carry an infinite rate.
            if let Ok(v) = tilted_rate(rd, x, y) {
                delta = delta.min(v);
            }
        }
    }
    if !(delta > GAP_TOLERANCE) {
        return Err(Error::GapVanishes { delta });
    }
    Ok((delta, delta / 2.0))
}

/// Mass of `N(mean, var)` on `(lo, hi)`, accurate in both tails.
pub fn normal_mass(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    let (a, b) = ((lo - mean) / s, (hi - mean) / s);
    if a >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        1.0 - 0.5 * (erfc(-a) + erfc(b))
    }
}
