//! Small-time CGF expansion for the correlated Heston log-price
//!
//! ```text
//! dX = (r + k V) dt + sqrt(V) dW1
//! dV = (a - b V) dt + sigma sqrt(V) dW2,   d<W1, W2> = rho dt
//! ```
//!
//! The rescaled CGF is `Λ(u, t) = t C(-u/t, t) + t D(-u/t, t) v0 - u x0`,
//! with `Λ(u, t) = Λ⁽⁰⁾(u) + t Λ⁽¹⁾(u) + t² Λ⁽²⁾(u) + O(t³)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::legendre::CgfExpansion;
use crate::smooth::SmoothScalarFn;

/// Below this `|u|` the second-order coefficient is interpolated.
pub const LAMBDA2_INTERP_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub r: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub rho: f64,
    pub x0: f64,
    pub v0: f64,
}

impl HestonParams {
    /// The uncorrelated reference model used throughout the tests:
    /// `r = 0, k = -1/2, a = b = sigma = v0 = 1, rho = x0 = 0`.
    pub fn toy() -> Self {
        Self { r: 0.0, k: -0.5, a: 1.0, b: 1.0, sigma: 1.0, rho: 0.0, x0: 0.0, v0: 1.0 }
    }

    pub fn validate(&self) -> Result<Self> {
        let fields = [self.r, self.k, self.a, self.b, self.sigma, self.rho, self.x0, self.v0];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Heston parameters must be finite".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma = {} must be positive", self.sigma)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho = {} must lie in (-1, 1)", self.rho)));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return Err(Error::InvalidParameter("a and b must be nonnegative".into()));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidParameter(format!("v0 = {} must be positive", self.v0)));
        }
        Ok(*self)
    }

    /// `θ = σ sqrt(1 - ρ²) / 2`.
    pub fn theta(&self) -> f64 {
        0.5 * self.sigma * self.q()
    }

    fn q(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    fn m(&self) -> f64 {
        self.k * self.sigma + self.b * self.rho
    }

    fn big_k(&self) -> f64 {
        let m = self.m();
        self.b * self.b * (1.0 - self.rho * self.rho) + m * m
    }

    /// `Ŝ(u) = sqrt(1-ρ²) cos(θu) + ρ sin(θu)`, positive on the domain.
    pub fn s_hat(&self, u: f64) -> f64 {
        let x = self.theta() * u;
        self.q() * x.cos() + self.rho * x.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInfo {
    pub u_min: f64,
    pub u_max: f64,
}

impl DomainInfo {
    pub fn contains(&self, u: f64) -> bool {
        self.u_min < u && u < self.u_max
    }
}

/// Largest negative and smallest positive roots of `Ŝ`.
pub fn domain(p: &HestonParams) -> DomainInfo {
    let th = p.theta();
    // Ŝ(u) = sin(θu + φ0) with φ0 = atan2(q, ρ) ∈ (0, π).
    let phi0 = p.q().atan2(p.rho);
    let polish = |mut u: f64| {
        for _ in 0..3 {
            let x = th * u;
            let ds = th * (p.rho * x.cos() - p.q() * x.sin());
            if ds == 0.0 {
                break;
            }
            u -= p.s_hat(u) / ds;
        }
        u
    };
    DomainInfo { u_min: polish(-phi0 / th), u_max: polish((PI - phi0) / th) }
}

fn check_domain(p: &HestonParams, u: f64) -> Result<()> {
    let dom = domain(p);
    if dom.contains(u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("u = {u} outside the Heston domain ({}, {})", dom.u_min, dom.u_max)))
    }
}

/// `Λ⁽⁰⁾(u) = v0 u sin(θu) / (σ Ŝ(u)) - x0 u`.
pub fn lambda0(p: &HestonParams, u: f64) -> Result<f64> {
    check_domain(p, u)?;
    Ok(lambda0_raw(p, u))
}

fn lambda0_raw(p: &HestonParams, u: f64) -> f64 {
    p.v0 * u * (p.theta() * u).sin() / (p.sigma * p.s_hat(u)) - p.x0 * u
}

pub fn dlambda0(p: &HestonParams, u: f64) -> Result<f64> {
    check_domain(p, u)?;
    Ok(dlambda0_raw(p, u))
}

fn dlambda0_raw(p: &HestonParams, u: f64) -> f64 {
    let (q, rho, s, th) = (p.q(), p.rho, p.sigma, p.theta());
    let x = 2.0 * th * u;
    let num = rho * (1.0 - x.cos()) + q * x.sin() + s * (1.0 - rho * rho) * u;
    p.v0 / (2.0 * s) * num / p.s_hat(u).powi(2) - p.x0
}

pub fn d2lambda0(p: &HestonParams, u: f64) -> Result<f64> {
    check_domain(p, u)?;
    Ok(d2lambda0_raw(p, u))
}

fn d2lambda0_raw(p: &HestonParams, u: f64) -> f64 {
    let (q, rho, s, th) = (p.q(), p.rho, p.sigma, p.theta());
    let (sn, cs) = (th * u).sin_cos();
    let q2 = 1.0 - rho * rho;
    let big_s = (2.0 * th + s * q) * (rho * q * sn + q2 * cs) + 2.0 * s * th * q2 * u * (q * sn - rho * cs);
    p.v0 * big_s / (2.0 * s * p.s_hat(u).powi(3))
}

/// Critical point `u*(x)` solving `∂Λ⁽⁰⁾(u) = -x` inside the domain.
pub fn ustar_heston(p: &HestonParams, x: f64) -> Result<f64> {
    let dom = domain(p);
    let target = -x;
    let g = |u: f64| dlambda0_raw(p, u) - target;
    // ∂Λ⁽⁰⁾ runs from -∞ to +∞ across the domain; pull the ends in until
    // the sign change is captured.
    let (mut lo, mut hi) = (dom.u_min, dom.u_max);
    let mut shrink = 1e-3;
    while !(g(lo + shrink * (0.0 - lo)) < 0.0) {
        shrink *= 0.1;
        if shrink < 1e-15 {
            return Err(Error::BracketFailure { target });
        }
    }
    lo += shrink * (0.0 - lo);
    shrink = 1e-3;
    while !(g(hi - shrink * hi) > 0.0) {
        shrink *= 0.1;
        if shrink < 1e-15 {
            return Err(Error::BracketFailure { target });
        }
    }
    hi -= shrink * hi;
    let mut u = if g(0.0) < 0.0 { 0.5 * hi } else { 0.5 * lo };
    for _ in 0..200 {
        let gu = g(u);
        if gu == 0.0 {
            return Ok(u);
        }
        if gu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let h = d2lambda0_raw(p, u);
        let newton = u - gu / h;
        let next = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - u).abs() <= 4.0 * f64::EPSILON * (1.0 + u.abs()) {
            return Ok(next);
        }
        u = next;
    }
    Err(Error::BracketFailure { target })
}

/// `Λ⁽¹⁾` in closed form.
pub fn lambda1(p: &HestonParams, u: f64) -> Result<f64> {
    check_domain(p, u)?;
    Ok(lambda1_raw(p, u))
}

fn lambda1_raw(p: &HestonParams, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let (q, rho, s, a) = (p.q(), p.rho, p.sigma, p.a);
    let (sn, cs) = (p.theta() * u).sin_cos();
    let [e1, e2, e3] = e_coefficients(p, u);
    let den = p.s_hat(u);
    (a * rho / s - p.r) * u - 2.0 * a / (s * s) * (den / q).ln()
        + p.v0 * (e1 * cs * cs + e2 * cs * sn + e3 * sn * sn) / (s * s * den * den)
}

fn e_coefficients(p: &HestonParams, u: f64) -> [f64; 3] {
    let (q, rho, s, k, b, m) = (p.q(), p.rho, p.sigma, p.k, p.b, p.m());
    [-u * s * m / 2.0, -2.0 * k * s * q + m / q, -(2.0 * k * rho * s + b + u * s * m / 2.0)]
}

fn i_coefficients(p: &HestonParams, u: f64) -> [f64; 4] {
    let (q, rho, s, k, b, m, kk) = (p.q(), p.rho, p.sigma, p.k, p.b, p.m(), p.big_k());
    let q2 = 1.0 - rho * rho;
    let (sn, cs) = (p.theta() * u).sin_cos();
    let i0 = -u * rho * s * q * m * cs + (2.0 * b + 2.0 * rho * k * s + u * s * m * q2) * sn;
    let i1 = -kk / (2.0 * q2) + m * m / q2 * sn * sn + (kk / (s * q2 * q * u) + b * m / q) * sn * cs;
    let i2 = 2.0 * (2.0 * k * s * q - (2.0 + rho * s * u) * m / (2.0 * q)) * cs
        + 2.0 * (2.0 * k * rho * s + b + u * s * m / 2.0) * sn;
    let i3 = u * s * m / 2.0 + b * sn * sn - m / q * sn * cs;
    [i0, i1, i2, i3]
}

/// `Λ⁽²⁾` in closed form, interpolated through `0` for `|u| < 1e-4`.
pub fn lambda2(p: &HestonParams, u: f64) -> Result<f64> {
    check_domain(p, u)?;
    if u.abs() >= LAMBDA2_INTERP_RADIUS {
        return Ok(lambda2_raw(p, u));
    }
    // Least squares for α u + β u² through ±r, ±2r.
    let r = LAMBDA2_INTERP_RADIUS;
    let nodes = [-2.0 * r, -r, r, 2.0 * r];
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for x in nodes {
        let y = lambda2_raw(p, x);
        s11 += x * x;
        s12 += x * x * x;
        s22 += x * x * x * x;
        b1 += x * y;
        b2 += x * x * y;
    }
    let det = s11 * s22 - s12 * s12;
    let alpha = (b1 * s22 - b2 * s12) / det;
    let beta = (s11 * b2 - s12 * b1) / det;
    Ok(alpha * u + beta * u * u)
}

fn lambda2_raw(p: &HestonParams, u: f64) -> f64 {
    let (s, a, b, rho) = (p.sigma, p.a, p.b, p.rho);
    let q2 = 1.0 - rho * rho;
    let den = p.s_hat(u);
    let [i0, i1, i2, i3] = i_coefficients(p, u);
    a * b / (s * s) - a / (s.powi(3) * q2 * u) * i0 / den
        + p.v0 / 2.0 * i1 / (s * s * den * den)
        + p.v0 / 2.0 * i2 * i3 / (u * s.powi(3) * den.powi(3))
}

/// Whether the Taylor coefficients carry `|u|` or `u`; the resulting
/// `Λ⁽¹⁾`, `Λ⁽²⁾` agree either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Abs,
    Signed,
}

/// Small-`t` Taylor data at a fixed `u ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTable {
    pub u: f64,
    /// Coefficients of `S(u,t) = c0 + c1 t + c2 t²/2 + O(t³)`.
    pub c: [f64; 3],
    /// `sin S(u,t)`.
    pub cap_u: [f64; 3],
    /// `cos S(u,t)`.
    pub w: [f64; 3],
    /// `2S cos S + (bt + ρσu) sin S`.
    pub v: [f64; 3],
    /// `t D(-u/t, t)`.
    pub t: [f64; 3],
    pub l: [f64; 2],
    pub q: f64,
    pub e: [f64; 3],
    pub i: [f64; 4],
}

pub fn taylor_table(p: &HestonParams, u: f64) -> Result<TaylorTable> {
    taylor_table_with(p, u, Branch::Abs)
}

pub fn taylor_table_with(p: &HestonParams, u: f64, branch: Branch) -> Result<TaylorTable> {
    if u == 0.0 {
        return Err(Error::Domain("the Taylor table needs u != 0".into()));
    }
    check_domain(p, u)?;
    let (rho, s, k, b, m, kk) = (p.rho, p.sigma, p.k, p.b, p.m(), p.big_k());
    let q = p.q();
    let au = match branch {
        Branch::Abs => u.abs(),
        Branch::Signed => u,
    };
    let c0 = au * s * q / 2.0;
    let c1 = -(au / u) * m / (2.0 * q);
    let c2 = -(au / (u * u)) * kk / (2.0 * s * q.powi(3));
    let (sn, cs) = c0.sin_cos();
    let u0 = sn;
    let u1 = c1 * cs;
    let u2 = c2 * cs - c1 * c1 * sn;
    let w0 = cs;
    let w1 = -c1 * sn;
    let w2 = -(c2 * sn + c1 * c1 * cs);
    let v0 = 2.0 * c0 * w0 + rho * s * u * u0;
    let v1 = 2.0 * c0 * w1 + 2.0 * c1 * w0 + b * u0 + rho * s * u * u1;
    let v2 = 2.0 * c0 * w2 + 4.0 * c1 * w1 + 2.0 * c2 * w0 + 2.0 * b * u1 + rho * s * u * u2;
    let qq = u * u * u2 * v0 * v0 - 4.0 * k * u * u1 * v0 * v0 - u * u * u0 * v0 * v2 - 2.0 * u * u * u1 * v0 * v1
        + 4.0 * k * u * u0 * v0 * v1
        + 2.0 * u * u * u0 * v1 * v1;
    let t0 = u * u * u0 / v0;
    let t1 = (u * u * u1 * v0 - 2.0 * k * u * u0 * v0 - u * u * u0 * v1) / (v0 * v0);
    let t2 = qq / v0.powi(3);
    let l0 = v0 / (2.0 * c0);
    let l1 = (c0 * v1 - c1 * v0) / (2.0 * c0 * c0);
    Ok(TaylorTable {
        u,
        c: [c0, c1, c2],
        cap_u: [u0, u1, u2],
        w: [w0, w1, w2],
        v: [v0, v1, v2],
        t: [t0, t1, t2],
        l: [l0, l1],
        q: qq,
        e: e_coefficients(p, u),
        i: i_coefficients(p, u),
    })
}

impl TaylorTable {
    /// `Λ⁽¹⁾` assembled from the table.
    pub fn lambda1(&self, p: &HestonParams) -> f64 {
        let (a, s, u) = (p.a, p.sigma, self.u);
        (a * p.rho / s - p.r) * u - 2.0 * a / (s * s) * self.l[0].ln() + p.v0 * self.t[1]
    }

    /// `Λ⁽²⁾` assembled from the table.
    pub fn lambda2(&self, p: &HestonParams) -> f64 {
        let (a, s) = (p.a, p.sigma);
        let [c0, c1, _] = self.c;
        let [v0, v1, _] = self.v;
        a * p.b / (s * s) - 2.0 * a / (s * s) * (c0 * v1 - c1 * v0) / (c0 * v0) + p.v0 / 2.0 * self.t[2]
    }
}

/// `S(u, t)` of the trigonometric representation, or `None` when `S² ≤ 0`.
pub fn s_of(p: &HestonParams, u: f64, t: f64) -> Option<f64> {
    let s = p.sigma;
    let s2 = 0.25
        * (u * u * (1.0 - p.rho * p.rho) * s * s - 2.0 * t * u * (p.k * s * s + p.b * p.rho * s) - t * t * p.b * p.b);
    (s2 > 0.0).then(|| s2.sqrt())
}

/// `(C(u,t), D(u,t))` with `E[exp(u X_t)] = exp(C + D v0 + u x0)`.
pub fn mgf_components(p: &HestonParams, u: f64, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    let s = p.sigma;
    let big_a = p.b - p.rho * s * u;
    let d2 = (p.rho * s * u - p.b).powi(2) - s * s * (2.0 * p.k * u + u * u);
    let half = 0.5 * t;
    // ξ(τ) = cosh(dτ/2) + A sinh(dτ/2)/d must stay positive on [0, t].
    let finite = if d2 < 0.0 {
        let w = (-d2).sqrt();
        w * half < FRAC_PI_2 + (big_a / w).atan()
    } else if d2 > 0.0 {
        let d = d2.sqrt();
        big_a / d >= -1.0 || (d * half).tanh() < -d / big_a
    } else {
        1.0 + big_a * half > 0.0
    };
    if !finite {
        return Err(Error::ExplosionRegion { u, t });
    }
    let d = Complex64::new(d2, 0.0).sqrt();
    let z = d * half;
    let sinh_over_d = if z.norm() < 1e-4 {
        let z2 = z * z;
        (1.0 + z2 / 6.0 + z2 * z2 / 120.0) * half
    } else {
        z.sinh() / d
    };
    let xi = z.cosh() + big_a * sinh_over_d;
    if !(xi.re > 0.0) {
        return Err(Error::ExplosionRegion { u, t });
    }
    let c = p.r * u * t + p.a / (s * s) * (big_a * t - 2.0 * xi.ln());
    let dd = (big_a * big_a - d2) / (s * s) * sinh_over_d / xi;
    let residue = c.im.abs().max(dd.im.abs());
    if residue > 1e-9 * (1.0 + c.re.abs().max(dd.re.abs())) {
        return Err(Error::BranchFault { residue });
    }
    Ok((c.re, dd.re))
}

/// `Λ(u, t)`, trigonometric form when `S² > 0`, complex otherwise.
pub fn lambda_scaled(p: &HestonParams, u: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let Some(big_s) = s_of(p, u, t) else {
        return lambda_scaled_complex(p, u, t);
    };
    if big_s >= PI {
        return Err(Error::ExplosionRegion { u: -u / t, t });
    }
    let s = p.sigma;
    let bb = p.b * t + p.rho * s * u;
    let sinc = big_s.sin() / big_s;
    // (2S cos S + (bt + ρσu) sin S) / (2S)
    let ratio = big_s.cos() + 0.5 * bb * sinc;
    if !(ratio > 0.0) {
        return Err(Error::ExplosionRegion { u: -u / t, t });
    }
    let tc = -t * p.r * u + t * p.a / (s * s) * (bb - 2.0 * ratio.ln());
    let td = (u * u - 2.0 * t * p.k * u) * sinc / (2.0 * ratio);
    Ok(tc + td * p.v0 - u * p.x0)
}

/// `Λ(u, t)` through [`mgf_components`].
pub fn lambda_scaled_complex(p: &HestonParams, u: f64, t: f64) -> Result<f64> {
    let (c, d) = mgf_components(p, -u / t, t)?;
    Ok(t * c + t * d * p.v0 - u * p.x0)
}

/// The expansion triple as generic smooth functions on the domain.
pub fn cgf_expansion(p: &HestonParams) -> Result<CgfExpansion> {
    let p = p.validate()?;
    let dom = domain(&p);
    let inside = move |u: f64| dom.contains(u);
    let guard = move |f: fn(&HestonParams, f64) -> f64| move |u: f64| if inside(u) { f(&p, u) } else { f64::NAN };
    let l0 = SmoothScalarFn::new(guard(lambda0_raw))
        .with_derivative(guard(dlambda0_raw))
        .with_derivative(guard(d2lambda0_raw))
        .with_domain(dom.u_min, dom.u_max);
    let l1 = SmoothScalarFn::new(guard(lambda1_raw)).with_domain(dom.u_min, dom.u_max);
    let l2 = SmoothScalarFn::new(move |u: f64| lambda2(&p, u).unwrap_or(f64::NAN)).with_domain(dom.u_min, dom.u_max);
    CgfExpansion::new(l0, l1, l2, (dom.u_min, dom.u_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set_a() -> HestonParams {
        HestonParams { r: 0.03, k: -0.5, a: 0.4, b: 1.5, sigma: 0.8, rho: 0.5, x0: 0.1, v0: 0.2 }
    }

    #[test]
    fn toy_values_at_half() {
        let p = HestonParams::toy();
        assert_relative_eq!(lambda0(&p, 0.5).unwrap(), 0.5 * 0.25f64.tan(), max_relative = 1e-14);
        assert_relative_eq!(lambda0(&p, 0.5).unwrap(), 0.127_670_960_610_518_14, max_relative = 1e-13);
        assert_relative_eq!(lambda1(&p, 0.5).unwrap(), 0.258_783_503_464_213_7, max_relative = 1e-12);
        assert_relative_eq!(lambda2(&p, 0.5).unwrap(), 0.003_885_787_718_696_345_4, max_relative = 1e-10);
        assert_relative_eq!(lambda0(&p, 1.0).unwrap(), 0.5f64.tan(), max_relative = 1e-14);
    }

    #[test]
    fn domain_endpoints() {
        let mut p = HestonParams::toy();
        let d = domain(&p);
        assert_relative_eq!(d.u_min, -PI, max_relative = 1e-14);
        assert_relative_eq!(d.u_max, PI, max_relative = 1e-14);
        p.rho = 1e-6;
        let d = domain(&p);
        assert!((d.u_min + PI).abs() < 1e-5 && (d.u_max - PI).abs() < 1e-5);
        for rho in [-0.7, -0.3, 0.4, 0.9] {
            p.rho = rho;
            p.sigma = 1.0;
            let d1 = domain(&p);
            assert!(p.s_hat(d1.u_min).abs() < 1e-12 && p.s_hat(d1.u_max).abs() < 1e-12);
            assert!(d1.u_min < 0.0 && d1.u_max > 0.0);
            p.sigma = 2.0;
            let d2 = domain(&p);
            assert_relative_eq!(d2.u_min, d1.u_min / 2.0, max_relative = 1e-12);
            assert_relative_eq!(d2.u_max, d1.u_max / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        for p in [HestonParams::toy(), set_a()] {
            for u in [-1.0, -0.2, 0.0, 0.4, 1.1] {
                let h = 1e-4;
                let fd1 = (lambda0(&p, u + h).unwrap() - lambda0(&p, u - h).unwrap()) / (2.0 * h);
                let fd2 = (dlambda0(&p, u + h).unwrap() - dlambda0(&p, u - h).unwrap()) / (2.0 * h);
                assert!((fd1 - dlambda0(&p, u).unwrap()).abs() < 1e-7);
                assert!((fd2 - d2lambda0(&p, u).unwrap()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn curvature_at_zero() {
        let p = HestonParams::toy();
        let th = p.theta();
        let expected = p.v0 * (2.0 * th + p.sigma) / (2.0 * p.sigma);
        assert_relative_eq!(d2lambda0(&p, 0.0).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn outside_domain_is_rejected() {
        let p = HestonParams::toy();
        assert!(matches!(lambda0(&p, 3.2), Err(Error::Domain(_))));
        assert!(matches!(lambda1(&p, -3.2), Err(Error::Domain(_))));
    }

    #[test]
    fn taylor_identities() {
        let p = set_a();
        for u in [-1.0, -0.3, 0.5, 1.2] {
            let tt = taylor_table(&p, u).unwrap();
            assert!((tt.t[0] * tt.v[0] - u * u * tt.cap_u[0]).abs() < 1e-12);
            assert!((tt.v[0] - (2.0 * tt.c[0] * tt.w[0] + p.rho * p.sigma * u * tt.cap_u[0])).abs() < 1e-12);
        }
        let one = HestonParams { rho: 0.0, sigma: 1.0, ..HestonParams::toy() };
        assert_relative_eq!(taylor_table(&one, 1.0).unwrap().c[0], 0.5);
        let still = HestonParams { k: 0.0, b: 0.0, ..set_a() };
        let tt = taylor_table(&still, 0.7).unwrap();
        assert_eq!(tt.c[1], 0.0);
        assert_eq!(tt.c[2], 0.0);
    }

    #[test]
    fn mgf_small_u_and_zero() {
        let p = HestonParams::toy();
        assert_eq!(mgf_components(&p, 0.0, 0.3).unwrap(), (0.0, 0.0));
        let (c, d) = mgf_components(&p, 0.5, 0.1).unwrap();
        assert!(c.is_finite() && d.is_finite());
    }

    #[test]
    fn trig_and_complex_paths_agree() {
        for p in [HestonParams::toy(), set_a()] {
            for u in [-0.8, 0.3, 1.0] {
                for t in [1e-3, 1e-2, 0.1] {
                    let a = lambda_scaled(&p, u, t).unwrap();
                    let b = lambda_scaled_complex(&p, u, t).unwrap();
                    assert!((a - b).abs() < 1e-10, "u={u} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn explosion_is_reported() {
        let p = HestonParams::toy();
        // Far beyond the moment explosion time for a large positive argument.
        assert!(matches!(mgf_components(&p, 5.0, 10.0), Err(Error::ExplosionRegion { .. })));
    }

    #[test]
    fn ustar_round_trip() {
        let p = set_a();
        let x = -dlambda0(&p, 0.3).unwrap();
        assert!((ustar_heston(&p, x).unwrap() - 0.3).abs() < 1e-9);
        let z0 = -dlambda0(&p, 0.0).unwrap();
        assert!(ustar_heston(&p, z0).unwrap().abs() < 1e-12);
    }
}
