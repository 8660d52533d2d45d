//! Smooth scalar functions with derivative access.
//!
//! A [`SmoothScalarFn`] carries its value and, optionally, a ladder of
//! closed-form derivatives. Orders beyond the ladder are obtained by central
//! finite differences of the highest closed-form derivative, extrapolated
//! twice with Richardson's scheme.

use std::fmt;
use std::sync::Arc;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Highest derivative order supported by [`SmoothScalarFn::derivative`].
pub const MAX_ORDER: usize = 5;

#[derive(Clone)]
pub struct SmoothScalarFn {
    ladder: Vec<Scalar>,
    domain: (f64, f64),
}

impl fmt::Debug for SmoothScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothScalarFn")
            .field("analytic_order", &self.analytic_order())
            .field("domain", &self.domain)
            .finish()
    }
}

impl SmoothScalarFn {
    /// A function known only through its values.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { ladder: vec![Arc::new(f)], domain: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    /// Appends the next closed-form derivative to the ladder.
    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.ladder.push(Arc::new(df));
        self
    }

    /// Restricts finite-difference stencils to the open interval `(lo, hi)`.
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_derivative(|_| 0.0).with_derivative(|_| 0.0)
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        let mut f = {
            let c = coeffs.to_vec();
            Self::new(move |z| horner(&c, z))
        };
        let mut current = coeffs.to_vec();
        for _ in 0..MAX_ORDER {
            current = poly_derivative(&current);
            let c = current.clone();
            f = f.with_derivative(move |z| horner(&c, z));
        }
        f
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Number of closed-form derivatives available beyond the value.
    pub fn analytic_order(&self) -> usize {
        self.ladder.len() - 1
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        (self.ladder[0])(z)
    }

    /// The `n`-th derivative at `z`. Order 0 is the value itself.
    pub fn derivative(&self, z: f64, n: usize) -> f64 {
        assert!(n <= MAX_ORDER, "derivative order {n} exceeds {MAX_ORDER}");
        let base = n.min(self.analytic_order());
        if base == n {
            return (self.ladder[n])(z);
        }
        let g = &self.ladder[base];
        richardson_derivative(|x| g(x), z, n - base, self.domain)
    }

    /// The `n`-th derivative by finite differences of the value alone,
    /// ignoring any closed forms.
    pub fn finite_difference(&self, z: f64, n: usize) -> f64 {
        assert!(n <= MAX_ORDER, "derivative order {n} exceeds {MAX_ORDER}");
        if n == 0 {
            return self.eval(z);
        }
        let g = &self.ladder[0];
        richardson_derivative(|x| g(x), z, n, self.domain)
    }

    /// `z ↦ self(a·z + b)`; closed-form derivatives are carried along.
    pub fn affine_argument(&self, a: f64, b: f64) -> Self {
        let mut out: Option<Self> = None;
        for (k, g) in self.ladder.iter().enumerate() {
            let g = Arc::clone(g);
            let scale = a.powi(k as i32);
            let h = move |z: f64| scale * g(a * z + b);
            out = Some(match out {
                None => Self::new(h),
                Some(f) => f.with_derivative(h),
            });
        }
        let (lo, hi) = self.domain;
        let (mut nlo, mut nhi) = ((lo - b) / a, (hi - b) / a);
        if nlo > nhi {
            std::mem::swap(&mut nlo, &mut nhi);
        }
        out.expect("ladder is never empty").with_domain(nlo, nhi)
    }
}

fn horner(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * z + ci)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect()
}

/// Stencil offsets/weights and the leading truncation order for a central
/// difference of order `n` with unit spacing.
fn stencil(n: usize) -> (&'static [(f64, f64)], f64, i32) {
    match n {
        1 => (&[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)], 12.0, 4),
        2 => (&[(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)], 12.0, 4),
        3 => (&[(-2.0, -1.0), (-1.0, 2.0), (1.0, -2.0), (2.0, 1.0)], 2.0, 2),
        4 => (&[(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)], 1.0, 2),
        5 => (&[(-3.0, -1.0), (-2.0, 4.0), (-1.0, -5.0), (1.0, 5.0), (2.0, -4.0), (3.0, 1.0)], 2.0, 2),
        _ => unreachable!("stencil order {n}"),
    }
}

/// Base step for an `n`-th derivative at `z`. The exponent balances the
/// O(h^(p+4)) truncation of the twice-extrapolated stencil against roundoff
/// growing like eps/h^n.
pub fn base_step(z: f64, n: usize) -> f64 {
    let (_, _, p) = stencil(n);
    let scale = (1e-2 * (1.0 + z.abs())).max(1.0);
    scale * f64::EPSILON.powf(1.0 / (n as f64 + p as f64 + 4.0)) * 2.0
}

fn central(f: &impl Fn(f64) -> f64, z: f64, n: usize, h: f64) -> f64 {
    let (pts, denom, _) = stencil(n);
    let sum: f64 = pts.iter().map(|&(k, w)| w * f(z + k * h)).sum();
    sum / (denom * h.powi(n as i32))
}

/// Central difference of order `n` with two Richardson levels.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, z: f64, n: usize, domain: (f64, f64)) -> f64 {
    let (pts, _, p) = stencil(n);
    let reach = pts.iter().map(|&(k, _)| k.abs()).fold(0.0, f64::max);
    let room = (z - domain.0).min(domain.1 - z);
    let mut h = base_step(z, n);
    if room.is_finite() && reach * h >= 0.2 * room {
        h = 0.2 * room / reach;
    }
    let d0 = central(&f, z, n, h);
    let d1 = central(&f, z, n, h / 2.0);
    let d2 = central(&f, z, n, h / 4.0);
    let w1 = 2f64.powi(p);
    let r0 = (w1 * d1 - d0) / (w1 - 1.0);
    let r1 = (w1 * d2 - d1) / (w1 - 1.0);
    let w2 = 2f64.powi(p + 2);
    (w2 * r1 - r0) / (w2 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn order_zero_is_exact() {
        let f = SmoothScalarFn::new(|z: f64| z.sin() * 3.0);
        for z in [-1.3, 0.0, 0.7, 12.0] {
            assert_eq!(f.derivative(z, 0), f.eval(z));
        }
    }

    #[test]
    fn finite_differences_match_closed_forms() {
        let f = SmoothScalarFn::new(|z: f64| z.exp());
        for z in [-1.0, 0.0, 0.5, 2.0] {
            for n in 1..=5 {
                let d = f.derivative(z, n);
                assert!(rel(d, z.exp()) < 1e-6, "exp n={n} z={z} got {d}");
            }
        }
        let g = SmoothScalarFn::new(|z: f64| z.sin());
        let exact = [f64::sin, f64::cos, |z: f64| -z.sin(), |z: f64| -z.cos(), f64::sin, f64::cos];
        for z in [0.3, 1.1, -2.0] {
            for (n, want) in exact.iter().enumerate().skip(1) {
                let d = g.derivative(z, n);
                assert!(rel(d, want(z)) < 1e-6, "sin n={n} z={z} got {d}");
            }
        }
    }

    #[test]
    fn tangent_near_pole_respects_domain() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let f = SmoothScalarFn::new(|z: f64| z.tan()).with_domain(-half_pi, half_pi);
        let z: f64 = 1.2;
        let sec2 = 1.0 / z.cos().powi(2);
        assert!(rel(f.derivative(z, 1), sec2) < 1e-6);
        assert!(rel(f.derivative(z, 2), 2.0 * sec2 * z.tan()) < 1e-6);
        // Stencil would cross the pole without the domain clamp.
        let z: f64 = 1.55;
        let sec2 = 1.0 / z.cos().powi(2);
        let d = f.derivative(z, 1);
        assert!(rel(d, sec2) < 1e-4, "{d} {sec2}");
    }

    #[test]
    fn ladder_is_extended_by_differences_of_top_rung() {
        let f =
            SmoothScalarFn::new(|z: f64| z.exp()).with_derivative(|z: f64| z.exp()).with_derivative(|z: f64| z.exp());
        for n in 3..=5 {
            assert!(rel(f.derivative(0.4, n), 0.4f64.exp()) < 1e-9);
        }
    }

    #[test]
    fn polynomial_derivatives() {
        let p = SmoothScalarFn::polynomial(&[1.0, -2.0, 0.0, 0.5]);
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 4.0);
        assert_eq!(p.derivative(2.0, 1), -2.0 + 6.0);
        assert_eq!(p.derivative(2.0, 3), 3.0);
        assert_eq!(p.derivative(2.0, 4), 0.0);
    }

    #[test]
    fn affine_argument_chains_derivatives() {
        let f = SmoothScalarFn::new(|z: f64| z.powi(3)).with_derivative(|z: f64| 3.0 * z * z);
        let g = f.affine_argument(2.0, 1.0);
        assert_eq!(g.eval(1.0), 27.0);
        assert_eq!(g.derivative(1.0, 1), 2.0 * 27.0);
        assert!(rel(g.derivative(1.0, 2), 4.0 * 6.0 * 3.0) < 1e-8);
    }
}
