//! Independent checks: Monte Carlo for the Heston SDE, empirical
//! probabilities, and finite-t extraction of the expansion coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::polyfit;
use crate::heston::HestonParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler with the variance floored at zero inside drift and diffusion.
    FullTruncationEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Pair path `2j + 1` with path `2j` by negating its normals.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_paths, n_steps, seed, scheme: Scheme::FullTruncationEuler, antithetic: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_paths and n_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn simulate_path(p: &HestonParams, dt: f64, steps: usize, rng: &mut ChaCha8Rng, sign: f64) -> f64 {
    let q = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let sq_dt = dt.sqrt();
    let (mut x, mut v) = (p.x0, p.v0);
    for _ in 0..steps {
        let z1: f64 = sign * Distribution::<f64>::sample(&StandardNormal, rng);
        let z2: f64 = sign * Distribution::<f64>::sample(&StandardNormal, rng);
        let vp = v.max(0.0);
        let sv = vp.sqrt() * sq_dt;
        x += (p.r + p.k * vp) * dt + sv * z1;
        v += (p.a - p.b * vp) * dt + p.sigma * sv * (p.rho * z1 + q * z2);
    }
    x
}

/// Terminal values `X_ε` for each path. The result depends only on
/// `(p, eps, cfg)`, not on the worker count.
pub fn simulate_heston(p: &HestonParams, eps: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let dt = eps / cfg.n_steps as f64;
    let samples = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let (stream, sign) =
                if cfg.antithetic { ((i / 2) as u64, if i % 2 == 1 { -1.0 } else { 1.0 }) } else { (i as u64, 1.0) };
            let mut rng = path_rng(cfg.seed, stream);
            match cfg.scheme {
                Scheme::FullTruncationEuler => simulate_path(p, dt, cfg.n_steps, &mut rng, sign),
            }
        })
        .collect();
    Ok(samples)
}

/// Fraction of samples in the open interval `(lo, hi)` with its binomial
/// standard error.
pub fn empirical_probability(samples: &[f64], a: (f64, f64)) -> Result<EmpiricalEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let n = samples.len();
    let hits = samples.iter().filter(|&&s| a.0 < s && s < a.1).count();
    let p = hits as f64 / n as f64;
    Ok(EmpiricalEstimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n })
}

/// Sample mean of `exp(u X)` with its standard error.
pub fn empirical_mgf(samples: &[f64], u: f64) -> Result<EmpiricalEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let vals: Vec<f64> = samples.iter().map(|x| (u * x).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(EmpiricalEstimate { value: mean, std_error: (var / n).sqrt(), n: samples.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

/// Fits `Λ(t) ≈ Λ⁽⁰⁾ + tΛ⁽¹⁾ + t²Λ⁽²⁾` by least squares on a dyadic grid
/// of at least six points.
pub fn extract_expansion(f: impl Fn(f64) -> Result<f64>, t_grid: &[f64]) -> Result<Extraction> {
    extract_expansion_with_degree(f, t_grid, 2)
}

/// As [`extract_expansion`], fitting a polynomial of the given degree
/// (at least 2) and reporting its first three coefficients. Extra degrees
/// absorb the `t³` and higher terms when the grid is not tiny.
pub fn extract_expansion_with_degree(
    f: impl Fn(f64) -> Result<f64>,
    t_grid: &[f64],
    degree: usize,
) -> Result<Extraction> {
    if t_grid.len() < 6 || degree < 2 {
        return Err(Error::InvalidParameter("need at least 6 grid points and degree >= 2".into()));
    }
    let mut sorted = t_grid.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let dyadic = sorted.windows(2).all(|w| (w[0] / w[1] - 2.0).abs() < 1e-9);
    if !dyadic || !(sorted[sorted.len() - 1] > 0.0) {
        return Err(Error::InvalidParameter("t grid must be positive and dyadic".into()));
    }
    let ys = t_grid.iter().map(|&t| f(t)).collect::<Result<Vec<f64>>>()?;
    let fit = polyfit(t_grid, &ys, degree)?;
    Ok(Extraction { lambda0: fit.coeffs[0], lambda1: fit.coeffs[1], lambda2: fit.coeffs[2], residual: fit.residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::dyadic;

    #[test]
    fn exact_quadratic_extraction() {
        let e = extract_expansion(|t| Ok(1.0 + 2.0 * t + 3.0 * t * t), &dyadic(0.1, 8)).unwrap();
        assert!((e.lambda0 - 1.0).abs() < 1e-12);
        assert!((e.lambda1 - 2.0).abs() < 1e-12);
        assert!((e.lambda2 - 3.0).abs() < 1e-9);
        let u: f64 = 0.7;
        let g = extract_expansion(|_| Ok(u * u / 2.0), &dyadic(0.1, 6)).unwrap();
        assert!((g.lambda0 - u * u / 2.0).abs() < 1e-14 && g.lambda1.abs() < 1e-12 && g.lambda2.abs() < 1e-10);
    }

    #[test]
    fn grid_must_be_dyadic() {
        let grid = [0.1, 0.05, 0.03, 0.0125, 0.00625, 0.003125];
        assert!(extract_expansion(Ok, &grid).is_err());
        assert!(extract_expansion(Ok, &dyadic(0.1, 5)).is_err());
    }

    #[test]
    fn degenerate_variance_is_deterministic() {
        let p = HestonParams { v0: 0.0, a: 0.0, r: 0.05, x0: 0.3, ..HestonParams::toy() };
        let xs = simulate_heston(&p, 0.2, &McConfig::new(16, 50, 1)).unwrap();
        assert!(xs.iter().all(|x| (x - (0.3 + 0.05 * 0.2)).abs() < 1e-14));
    }

    #[test]
    fn probability_edge_cases() {
        let s = [0.1, 0.2, 0.3];
        let all = empirical_probability(&s, (0.0, 1.0)).unwrap();
        assert_eq!((all.value, all.std_error, all.n), (1.0, 0.0, 3));
        let none = empirical_probability(&s, (2.0, 3.0)).unwrap();
        assert_eq!(none.value, 0.0);
        assert!(empirical_probability(&[], (0.0, 1.0)).is_err());
    }

    #[test]
    fn antithetic_pairs_mirror_each_other() {
        let p = HestonParams { sigma: 1e-9, a: 0.0, b: 0.0, k: 0.0, ..HestonParams::toy() };
        let cfg = McConfig { antithetic: true, ..McConfig::new(4, 10, 9) };
        let xs = simulate_heston(&p, 0.1, &cfg).unwrap();
        assert!((xs[0] + xs[1]).abs() < 1e-6 && (xs[2] + xs[3]).abs() < 1e-6);
    }
}
