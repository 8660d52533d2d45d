//! Laplace's method for `∫ f(z) exp(-φ(z)/ε) dz` around an interior minimum.
//!
//! [`expand`] produces the zeroth- and first-order coefficients of
//!
//! ```text
//! exp(-φ(z₀)/ε) · sqrt(2πε/φ''(z₀)) · [ f(z₀) + ε·c₁ + O(ε²) ]
//! c₁ = f''/(2φ'') + 5(φ''')² f/(24(φ'')³) − φ'''' f/(8(φ'')²) − φ''' f'/(2(φ'')²)
//! ```
//!
//! and [`quadrature_reference`] is the independent oracle the expansion is
//! checked against.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::quadrature::{self, Tolerance};
use crate::smooth::SmoothScalarFn;

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Largest argument of `exp(-x)` that does not underflow to zero.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Zero,
    One,
}

#[derive(Debug, Clone)]
pub struct LaplaceProblem {
    pub integrand: SmoothScalarFn,
    pub exponent: SmoothScalarFn,
    pub interval: (f64, f64),
    pub minimizer: f64,
}

impl LaplaceProblem {
    /// Builds a problem with a caller-supplied minimizer, checking that it is
    /// an interior critical point with positive curvature.
    pub fn new(
        integrand: SmoothScalarFn,
        exponent: SmoothScalarFn,
        interval: (f64, f64),
        minimizer: f64,
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a < minimizer && minimizer < b) {
            return Err(Error::Domain(format!("minimizer {minimizer} not inside ({a}, {b})")));
        }
        let slope = exponent.derivative(minimizer, 1);
        let tol = 1e-10 * (1.0 + exponent.eval(minimizer).abs());
        if slope.abs() > tol {
            return Err(Error::Domain(format!("exponent slope {slope:e} at {minimizer} exceeds {tol:e}")));
        }
        let curvature = exponent.derivative(minimizer, 2);
        if !(curvature > 0.0) {
            return Err(Error::NonConvexAtMinimum { at: minimizer, curvature });
        }
        Ok(Self { integrand, exponent, interval, minimizer })
    }

    /// Builds a problem, locating the minimizer with [`find_minimizer`].
    pub fn locate(integrand: SmoothScalarFn, exponent: SmoothScalarFn, interval: (f64, f64)) -> Result<Self> {
        let z0 = find_minimizer(&exponent, interval)?;
        Self::new(integrand, exponent, interval, z0)
    }

    /// Shifts the problem by `offset`: `z ↦ z - offset` in every function.
    pub fn translate(&self, offset: f64) -> Self {
        Self {
            integrand: self.integrand.affine_argument(1.0, -offset),
            exponent: self.exponent.affine_argument(1.0, -offset),
            interval: (self.interval.0 + offset, self.interval.1 + offset),
            minimizer: self.minimizer + offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCoefficients {
    /// φ(z₀).
    pub exponent_value: f64,
    /// φ''(z₀).
    pub gauss_curvature: f64,
    /// f(z₀).
    pub order0: f64,
    /// First-order correction; `None` for an order-0 expansion.
    pub order1: Option<f64>,
}

impl LaplaceCoefficients {
    pub fn order(&self) -> Order {
        if self.order1.is_some() {
            Order::One
        } else {
            Order::Zero
        }
    }

    /// Value of the truncated expansion at `eps > 0`.
    pub fn evaluate(&self, eps: f64) -> f64 {
        self.prefactor(eps) * self.bracket(eps)
    }

    /// `sqrt(2πε/φ'')·exp(-φ(z₀)/ε)`.
    pub fn prefactor(&self, eps: f64) -> f64 {
        (-self.exponent_value / eps).exp() * (2.0 * PI * eps / self.gauss_curvature).sqrt()
    }

    /// The bracket `order0 + ε·order1`.
    pub fn bracket(&self, eps: f64) -> f64 {
        self.order0 + self.order1.map_or(0.0, |c| eps * c)
    }
}

/// Locates the unique interior minimum of `phi` on `(a, b)`: golden-section
/// bracketing followed by a safeguarded Newton polish on φ'.
pub fn find_minimizer(phi: &SmoothScalarFn, interval: (f64, f64)) -> Result<f64> {
    let (a0, b0) = interval;
    if !(a0 < b0) {
        return Err(Error::Domain(format!("empty interval ({a0}, {b0})")));
    }
    let width = b0 - a0;
    let (mut a, mut b) = (a0, b0);
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = phi.eval(x1);
    let mut f2 = phi.eval(x2);
    while b - a > 1e-7 * width {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = phi.eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = phi.eval(x2);
        }
    }
    let candidate = 0.5 * (a + b);
    let edge = 1e-9 * width;
    let near_edge = |z: f64| z - a0 <= edge.max(2e-7 * width) || b0 - z <= edge.max(2e-7 * width);
    if near_edge(candidate) {
        return Err(Error::NoInteriorMinimum { candidate, lo: a0, hi: b0 });
    }

    // Newton on φ' inside a bracket around the golden-section candidate.
    let pad = 4.0 * (b - a);
    let (mut lo, mut hi) = ((candidate - pad).max(a0 + edge), (candidate + pad).min(b0 - edge));
    let (mut glo, ghi) = (phi.derivative(lo, 1), phi.derivative(hi, 1));
    let mut z = candidate;
    if glo < 0.0 && ghi > 0.0 {
        for _ in 0..60 {
            let g = phi.derivative(z, 1);
            if g == 0.0 {
                break;
            }
            if (g < 0.0) == (glo < 0.0) {
                lo = z;
                glo = g;
            } else {
                hi = z;
            }
            let h = phi.derivative(z, 2);
            let newton = z - g / h;
            let next = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let done = (next - z).abs() <= 4.0 * f64::EPSILON * (1.0 + z.abs());
            z = next;
            if done || hi - lo <= 4.0 * f64::EPSILON * (1.0 + z.abs()) {
                break;
            }
        }
    }
    if z - a0 <= edge || b0 - z <= edge {
        return Err(Error::NoInteriorMinimum { candidate: z, lo: a0, hi: b0 });
    }
    let curvature = phi.derivative(z, 2);
    let secant = ((phi.eval(a0) - phi.eval(z)).abs() + (phi.eval(b0) - phi.eval(z)).abs()) / (width * width);
    if !(curvature > 1e-10 * secant) {
        return Err(Error::NonConvexAtMinimum { at: z, curvature });
    }
    Ok(z)
}

/// Zeroth- or first-order Laplace coefficients at the problem's minimizer.
pub fn expand(problem: &LaplaceProblem, order: Order) -> Result<LaplaceCoefficients> {
    let z0 = problem.minimizer;
    let phi = &problem.exponent;
    let f = &problem.integrand;
    let p2 = phi.derivative(z0, 2);
    if !(p2 > 0.0) {
        return Err(Error::NonConvexAtMinimum { at: z0, curvature: p2 });
    }
    let f0 = f.eval(z0);
    let order1 = match order {
        Order::Zero => None,
        Order::One => {
            let (p3, p4) = (phi.derivative(z0, 3), phi.derivative(z0, 4));
            let (f1, f2) = (f.derivative(z0, 1), f.derivative(z0, 2));
            Some(first_order_bracket(f0, f1, f2, p2, p3, p4))
        }
    };
    Ok(LaplaceCoefficients { exponent_value: phi.eval(z0), gauss_curvature: p2, order0: f0, order1 })
}

/// The ε-coefficient of the Laplace bracket from the local derivatives of
/// the integrand (`f0..f2`) and exponent (`p2..p4`).
pub fn first_order_bracket(f0: f64, f1: f64, f2: f64, p2: f64, p3: f64, p4: f64) -> f64 {
    f2 / (2.0 * p2) + 5.0 * p3 * p3 * f0 / (24.0 * p2.powi(3)) - p4 * f0 / (8.0 * p2 * p2) - p3 * f1 / (2.0 * p2 * p2)
}

/// A quadrature value split as `value · exp(-shift/ε)` so that large
/// exponents neither overflow nor underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledIntegral {
    pub value: f64,
    pub shift: f64,
    pub error: f64,
}

/// Quadrature of `∫ f e^{-(φ - shift)/ε}` with the exponent measured from
/// `shift` (the smallest sampled value of φ unless given). Points where
/// `φ - shift > 745 ε` contribute exactly zero.
pub fn quadrature_scaled(
    f: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> f64,
    interval: (f64, f64),
    eps: f64,
    shift: Option<f64>,
    tol: Tolerance,
) -> Result<ScaledIntegral> {
    let (a, b) = interval;
    const SAMPLES: usize = 512;
    let grid: Vec<f64> = (0..=SAMPLES).map(|i| a + (b - a) * i as f64 / SAMPLES as f64).collect();
    let phis: Vec<f64> = grid.iter().map(|&z| phi(z)).collect();
    let (imin, pmin) = phis
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_finite())
        .fold((0, f64::INFINITY), |acc, (i, &p)| if p < acc.1 { (i, p) } else { acc });
    let shift = shift.unwrap_or(pmin);
    let integrand = |z: f64| {
        let d = phi(z) - shift;
        if d > UNDERFLOW_EXPONENT * eps {
            0.0
        } else {
            f(z) * (-d / eps).exp()
        }
    };
    let peak = grid.iter().map(|&z| integrand(z).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // Seed panels around the sampled minimum so narrow peaks are not missed.
    let mut breaks = vec![a];
    for &k in &[imin.saturating_sub(1), imin + 1] {
        let z = grid[k.min(SAMPLES)];
        if z > *breaks.last().unwrap() && z < b {
            breaks.push(z);
        }
    }
    breaks.push(b);
    let tol = Tolerance { abs: tol.abs * peak * eps.sqrt().min(1.0), rel: tol.rel };
    let r = quadrature::integrate_with_breaks(integrand, &breaks, tol)?;
    Ok(ScaledIntegral { value: r.value, shift, error: r.error })
}

/// Adaptive-quadrature value of `∫ₐᵇ f e^{-φ/ε} dz`.
pub fn quadrature_reference(f: &SmoothScalarFn, phi: &SmoothScalarFn, interval: (f64, f64), eps: f64) -> Result<f64> {
    let s = quadrature_scaled(|z| f.eval(z), |z| phi.eval(z), interval, eps, None, Tolerance::default())?;
    Ok(s.value * (-s.shift / eps).exp())
}

/// Relative residuals of an expansion against quadrature on an ε-grid,
/// with the fitted log–log order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order: Option<f64>,
}

pub fn residual_order(problem: &LaplaceProblem, order: Order, eps_grid: &[f64]) -> Result<ResidualReport> {
    let coeffs = expand(problem, order)?;
    let mut residuals = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        // Both sides carry exp(-φ(z₀)/ε); compare them with it removed.
        let q = quadrature_scaled(
            |z| problem.integrand.eval(z),
            |z| problem.exponent.eval(z),
            problem.interval,
            eps,
            Some(coeffs.exponent_value),
            Tolerance { abs: 1e-15, rel: 1e-13 },
        )?;
        let approx = (2.0 * PI * eps / coeffs.gauss_curvature).sqrt() * coeffs.bracket(eps);
        residuals.push(((q.value - approx) / approx).abs());
    }
    let order = loglog_slope(eps_grid, &residuals);
    Ok(ResidualReport { eps: eps_grid.to_vec(), residuals, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square() -> SmoothScalarFn {
        SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5])
    }

    #[test]
    fn minimizer_examples() {
        let z = find_minimizer(&half_square(), (-1.0, 1.0)).unwrap();
        assert!(z.abs() < 1e-12);
        let cubic = SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5, 1.0 / 6.0]);
        assert!(find_minimizer(&cubic, (-1.0, 1.0)).unwrap().abs() < 1e-12);
        let shifted = SmoothScalarFn::polynomial(&[0.18, -1.2, 2.0]);
        assert!((find_minimizer(&shifted, (-1.0, 1.0)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn minimizer_at_endpoint_is_rejected() {
        let slope = SmoothScalarFn::polynomial(&[0.0, 1.0]);
        assert!(matches!(find_minimizer(&slope, (-1.0, 1.0)), Err(Error::NoInteriorMinimum { .. })));
    }

    #[test]
    fn concave_exponent_is_rejected() {
        // Flat at the origin: golden section lands there but curvature is zero.
        let quartic = SmoothScalarFn::polynomial(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let err = find_minimizer(&quartic, (-1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NonConvexAtMinimum { .. }), "{err:?}");
    }

    #[test]
    fn gaussian_expansion_is_trivial() {
        let p = LaplaceProblem::new(SmoothScalarFn::constant(1.0), half_square(), (-20.0, 20.0), 0.0).unwrap();
        let c = expand(&p, Order::One).unwrap();
        assert_eq!((c.exponent_value, c.gauss_curvature, c.order0, c.order1), (0.0, 1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn evaluate_examples() {
        let c = LaplaceCoefficients { exponent_value: 0.0, gauss_curvature: 1.0, order0: 1.0, order1: Some(0.0) };
        assert!((c.evaluate(1.0) - (2.0 * PI).sqrt()).abs() < 1e-15);
        let c = LaplaceCoefficients { order1: Some(-0.5), ..c };
        assert!((c.evaluate(0.1) - (0.2 * PI).sqrt() * 0.95).abs() < 1e-15);
        let c = LaplaceCoefficients { exponent_value: 1.0, gauss_curvature: 2.0, order0: 3.0, order1: None };
        assert_eq!(c.order(), Order::Zero);
        assert!((c.evaluate(0.5) - (-2.0f64).exp() * (0.5 * PI).sqrt() * 3.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_examples() {
        let one = SmoothScalarFn::constant(1.0);
        let q = quadrature_reference(&one, &half_square(), (-20.0, 20.0), 1.0).unwrap();
        assert!((q - (2.0 * PI).sqrt()).abs() < 1e-10);
        let q = quadrature_reference(&one, &half_square(), (-20.0, 20.0), 0.25).unwrap();
        assert!((q - (PI / 2.0).sqrt()).abs() < 1e-10);
        let cos = SmoothScalarFn::new(f64::cos);
        let q = quadrature_reference(&cos, &half_square(), (-20.0, 20.0), 0.5).unwrap();
        assert!((q - PI.sqrt() * (-0.25f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn huge_exponent_does_not_underflow() {
        // φ(z₀)/ε = 4000 would underflow a direct evaluation.
        let phi = SmoothScalarFn::polynomial(&[4.0, 0.0, 0.5]);
        let s = quadrature_scaled(|_| 1.0, |z| phi.eval(z), (-3.0, 3.0), 1e-3, None, Tolerance::default()).unwrap();
        assert!((s.value - (2.0 * PI * 1e-3).sqrt()).abs() < 1e-12);
        assert_eq!(s.shift, 4.0);
    }
}
