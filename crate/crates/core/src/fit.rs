//! Least-squares helpers: polynomial fits and log–log order estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Vandermonde condition numbers above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in increasing powers of the abscissa.
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub condition: f64,
}

/// Fits `y ≈ Σ c_j x^j` for `j ≤ degree` by least squares.
///
/// Abscissae are rescaled by their largest magnitude before building the
/// Vandermonde matrix; the returned coefficients refer to the raw `x`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    assert_eq!(x.len(), y.len(), "abscissa/ordinate length mismatch");
    let m = x.len();
    let cols = degree + 1;
    if m < cols {
        return Err(Error::FitIllConditioned { condition: f64::INFINITY });
    }
    let scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let vander = DMatrix::from_fn(m, cols, |i, j| (x[i] / scale).powi(j as i32));
    let svd = vander.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::FitIllConditioned { condition });
    }
    let rhs = DVector::from_column_slice(y);
    let sol = svd.solve(&rhs, 0.0).map_err(|_| Error::FitIllConditioned { condition })?;
    let resid = &vander * &sol - &rhs;
    let residual = (resid.norm_squared() / m as f64).sqrt();
    let coeffs = sol.iter().enumerate().map(|(j, c)| c / scale.powi(j as i32)).collect();
    Ok(PolyFit { coeffs, residual, condition })
}

/// Least-squares slope of `log|r|` against `log x`.
///
/// Returns `None` when fewer than two residuals are nonzero and finite.
pub fn loglog_slope(x: &[f64], r: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(r)
        .filter(|(xi, ri)| **xi > 0.0 && ri.abs() > 0.0 && ri.is_finite())
        .map(|(xi, ri)| (xi.ln(), ri.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Dyadic grid `start · 2^{-j}` for `j = 0..count`.
pub fn dyadic(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start * 0.5f64.powi(j as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_quadratic() {
        let x = dyadic(1e-2, 8);
        let y: Vec<f64> = x.iter().map(|t| 1.0 + 2.0 * t + 3.0 * t * t).collect();
        let fit = polyfit(&x, &y, 2).unwrap();
        assert!((fit.coeffs[0] - 1.0).abs() < 1e-12);
        assert!((fit.coeffs[1] - 2.0).abs() < 1e-10);
        assert!((fit.coeffs[2] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn slope_of_power_law() {
        let x = dyadic(0.1, 6);
        let r: Vec<f64> = x.iter().map(|e| 4.0 * e * e).collect();
        assert!((loglog_slope(&x, &r).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&x, &[0.0; 6]), None);
    }

    #[test]
    fn repeated_abscissae_are_ill_conditioned() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(polyfit(&x, &y, 2), Err(Error::FitIllConditioned { .. })));
    }
}
