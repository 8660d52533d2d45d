//! Continuous affine diffusions on `ℝ₊^m × ℝ^n`: generalized Riccati
//! equations, the ε-homogenization `ψ^ε(u,t) = ε ψ(u/ε, εt)`, and its power
//! series in ε.
//!
//! `F(u) = ½⟨u, a u⟩ + ⟨b, u⟩ - c` and
//! `R_i(u) = ½⟨u, αⁱ u⟩ + ⟨βⁱ, u⟩ - γⁱ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::{dyadic, polyfit};
use crate::heston::HestonParams;
use crate::ode::{self, OdeOptions, OdeStats};

/// `|ψ|` beyond this is treated as a blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;
const ADMISSIBILITY_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineDiffusion {
    /// Number of nonnegative coordinates, listed first.
    pub m: usize,
    pub n: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    pub alpha: Vec<DMatrix<f64>>,
    pub beta: Vec<DVector<f64>>,
    pub gamma: Vec<f64>,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = 1.0 + m.amax();
    (m - m.transpose()).amax() <= 1e-12 * scale
}

impl AffineDiffusion {
    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    /// Checks shapes, symmetry, and admissibility on sampled states: `A(x)`
    /// positive semidefinite and killing rate `c + Σ xᵢγⁱ ≥ 0`.
    pub fn validated(self) -> Result<Self> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let square = |m: &DMatrix<f64>| m.nrows() == d && m.ncols() == d;
        if !square(&self.a) || self.b.len() != d {
            return Err(Error::InvalidParameter(format!("a must be {d}x{d} and b of length {d}")));
        }
        if self.alpha.len() != d || self.beta.len() != d || self.gamma.len() != d {
            return Err(Error::InvalidParameter(format!("need {d} alpha, beta and gamma entries")));
        }
        if self.alpha.iter().any(|m| !square(m)) || self.beta.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidParameter("alpha/beta entries have the wrong shape".into()));
        }
        if !is_symmetric(&self.a) || self.alpha.iter().any(|m| !is_symmetric(m)) {
            return Err(Error::InvalidParameter("a and alpha must be symmetric".into()));
        }
        let finite = self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
            && self.c.is_finite()
            && self.alpha.iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.beta.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.gamma.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("model coefficients must be finite".into()));
        }
        self.check_admissible()?;
        Ok(self)
    }

    fn check_admissible(&self) -> Result<()> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x00af_f1e0);
        for s in 0..=ADMISSIBILITY_SAMPLES {
            let x: Vec<f64> = (0..d)
                .map(|i| match (s, i < self.m) {
                    (0, _) => 0.0,
                    (_, true) => rng.random_range(0.0..5.0),
                    (_, false) => rng.random_range(-5.0..5.0),
                })
                .collect();
            let mut big_a = self.a.clone();
            let mut big_c = self.c;
            for (i, xi) in x.iter().enumerate() {
                big_a += &self.alpha[i] * *xi;
                big_c += self.gamma[i] * xi;
            }
            let lam = min_eigenvalue(&big_a);
            if lam < -1e-10 * (1.0 + big_a.amax()) {
                return Err(Error::InvalidParameter(format!("A(x) not positive semidefinite at x = {x:?}")));
            }
            if big_c < -1e-12 * (1.0 + big_c.abs()) {
                return Err(Error::InvalidParameter(format!("negative killing rate {big_c} at x = {x:?}")));
            }
        }
        Ok(())
    }

    /// The Heston pair in the state order `(v, x)`: one nonnegative
    /// coordinate followed by one real one.
    pub fn heston(p: &HestonParams) -> Result<Self> {
        let p = p.validate()?;
        let (s, rho) = (p.sigma, p.rho);
        let alpha_v = DMatrix::from_row_slice(2, 2, &[s * s, rho * s, rho * s, 1.0]);
        Self {
            m: 1,
            n: 1,
            a: DMatrix::zeros(2, 2),
            b: DVector::from_vec(vec![p.a, p.r]),
            c: 0.0,
            alpha: vec![alpha_v, DMatrix::zeros(2, 2)],
            beta: vec![DVector::from_vec(vec![-p.b, p.k]), DVector::zeros(2)],
            gamma: vec![0.0, 0.0],
        }
        .validated()
    }

    /// `F^ε` at `u`; `ε = 1` gives `F`.
    pub fn f_scaled(&self, u: &[f64], eps: f64) -> f64 {
        quad_form(&self.a, u) + eps * dot(self.b.as_slice(), u) - eps * eps * self.c
    }

    /// `R^ε` at `u`, written into `out`.
    pub fn r_scaled(&self, u: &[f64], eps: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = quad_form(&self.alpha[i], u) + eps * dot(self.beta[i].as_slice(), u) - eps * eps * self.gamma[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `½⟨u, M u⟩`.
fn quad_form(m: &DMatrix<f64>, u: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += u[i] * m[(i, j)] * u[j];
        }
    }
    0.5 * s
}

/// `⟨u, M v⟩` for symmetric `M`: the derivative of `½⟨u, M u⟩` along `v`.
fn bilinear(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += u[i] * m[(i, j)] * v[j];
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub u: Vec<f64>,
    pub times: Vec<f64>,
    /// `ψ(u, t)` at each output time.
    pub psi: Vec<Vec<f64>>,
    /// `φ(u, t)` at each output time.
    pub phi: Vec<f64>,
    pub stats: OdeStats,
    pub tol: f64,
}

impl RiccatiSolution {
    pub fn final_psi(&self) -> &[f64] {
        self.psi.last().expect("at least one output time")
    }

    pub fn final_phi(&self) -> f64 {
        *self.phi.last().expect("at least one output time")
    }
}

fn blown_up(d: usize) -> impl Fn(&[f64]) -> bool {
    move |y: &[f64]| y[..d].iter().any(|v| !(v.abs() <= BLOW_UP_THRESHOLD))
}

fn options(tol: f64, span: f64) -> Result<OdeOptions> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    Ok(OdeOptions { tol, initial_step: Some(1e-3 * span), ..OdeOptions::default() })
}

/// Integrates `ψ' = R^ε(ψ), φ' = F^ε(ψ)` from `(u, 0)` to each output time.
fn solve_scaled(model: &AffineDiffusion, u: &[f64], eps: f64, times: &[f64], tol: f64) -> Result<RiccatiSolution> {
    let d = model.dim();
    if u.len() != d {
        return Err(Error::Domain(format!("u has length {}, expected {d}", u.len())));
    }
    let span = times.last().copied().unwrap_or(0.0);
    if !(span > 0.0) || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("output times must be nonnegative, ascending and end above 0".into()));
    }
    let mut y0 = u.to_vec();
    y0.push(0.0);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        model.r_scaled(&y[..d], eps, &mut dy[..d]);
        dy[d] = model.f_scaled(&y[..d], eps);
    };
    let (ys, stats) = ode::integrate(rhs, &y0, 0.0, times, options(tol, span)?, blown_up(d))?;
    Ok(RiccatiSolution {
        u: u.to_vec(),
        times: times.to_vec(),
        psi: ys.iter().map(|y| y[..d].to_vec()).collect(),
        phi: ys.iter().map(|y| y[d]).collect(),
        stats,
        tol,
    })
}

/// Solves the Riccati system up to `t_end`.
pub fn solve_riccati(model: &AffineDiffusion, u: &[f64], t_end: f64, tol: f64) -> Result<RiccatiSolution> {
    solve_scaled(model, u, 1.0, &[t_end], tol)
}

/// Solves the Riccati system, reporting every time in `times`.
pub fn solve_riccati_at(model: &AffineDiffusion, u: &[f64], times: &[f64], tol: f64) -> Result<RiccatiSolution> {
    solve_scaled(model, u, 1.0, times, tol)
}

/// Trajectory of the homogenized system at every time in `times`.
pub fn solve_homogenized_at(
    model: &AffineDiffusion,
    u: &[f64],
    eps: f64,
    times: &[f64],
    tol: f64,
) -> Result<RiccatiSolution> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    solve_scaled(model, u, eps, times, tol)
}

/// `(ε ψ(u/ε, εt), ε φ(u/ε, εt))` by rescaling the original problem.
pub fn homogenized(model: &AffineDiffusion, u: &[f64], eps: f64, t: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let scaled: Vec<f64> = u.iter().map(|v| v / eps).collect();
    let sol = solve_scaled(model, &scaled, 1.0, &[eps * t], tol)?;
    Ok((sol.final_psi().iter().map(|v| eps * v).collect(), eps * sol.final_phi()))
}

/// Same quantity by integrating the scaled fields `R^ε`, `F^ε` directly.
pub fn homogenized_direct(model: &AffineDiffusion, u: &[f64], eps: f64, t: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let sol = solve_scaled(model, u, eps, &[t], tol)?;
    Ok((sol.final_psi().to_vec(), sol.final_phi()))
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    /// Largest ε of the fit grid `ε₀ 2^{-j}`.
    pub eps0: f64,
    pub levels: usize,
    pub tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { eps0: 0.05, levels: 8, tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationSeries {
    pub u: Vec<f64>,
    pub t: f64,
    /// `ψ⁽ⁿ⁾(u, t)` for `n = 0..=N`.
    pub psi: Vec<Vec<f64>>,
    /// `φ⁽ⁿ⁾(u, t)` for `n = 0..=N`.
    pub phi: Vec<f64>,
    /// Largest condition number met in the fits.
    pub condition: f64,
}

impl HomogenizationSeries {
    /// `φ⁽ⁿ⁾ + ⟨x, ψ⁽ⁿ⁾⟩` for every order.
    pub fn transform_coefficients(&self, x: &[f64]) -> Vec<f64> {
        self.psi.iter().zip(&self.phi).map(|(p, f)| f + dot(x, p)).collect()
    }

    pub fn order(&self) -> usize {
        self.psi.len() - 1
    }
}

/// Right-hand side of the joint system for `(ψ⁰, φ⁰, ψ¹, φ¹, ρ, σ)` where
/// `ψ^ε = ψ⁰ + εψ¹ + ε²ρ` and `φ^ε = φ⁰ + εφ¹ + ε²σ`. The remainders obey
/// a cancellation-free equation obtained by expanding the quadratic fields.
fn series_rhs(model: &AffineDiffusion, eps: f64, y: &[f64], dy: &mut [f64]) {
    let d = model.dim();
    let w = d + 1;
    let psi0 = &y[..d];
    let psi1 = &y[w..w + d];
    let rem = &y[2 * w..2 * w + d];
    // ψ¹ + ε ρ
    let mixed: Vec<f64> = psi1.iter().zip(rem).map(|(a, b)| a + eps * b).collect();
    for i in 0..d {
        let (al, be) = (&model.alpha[i], model.beta[i].as_slice());
        dy[i] = quad_form(al, psi0);
        dy[w + i] = bilinear(al, psi0, psi1) + dot(be, psi0);
        dy[2 * w + i] = bilinear(al, psi0, rem) + quad_form(al, &mixed) + dot(be, &mixed) - model.gamma[i];
    }
    let b = model.b.as_slice();
    dy[d] = quad_form(&model.a, psi0);
    dy[w + d] = bilinear(&model.a, psi0, psi1) + dot(b, psi0);
    dy[2 * w + d] = bilinear(&model.a, psi0, rem) + quad_form(&model.a, &mixed) + dot(b, &mixed) - model.c;
}

fn integrate_series(model: &AffineDiffusion, u: &[f64], t: f64, eps: f64, tol: f64) -> Result<Vec<f64>> {
    let d = model.dim();
    let w = d + 1;
    let mut y0 = vec![0.0; 3 * w];
    y0[..d].copy_from_slice(u);
    let guard = |y: &[f64]| y.iter().any(|v| !(v.abs() <= BLOW_UP_THRESHOLD));
    let (ys, _) = ode::integrate(|_, y, dy| series_rhs(model, eps, y, dy), &y0, 0.0, &[t], options(tol, t)?, guard)?;
    Ok(ys.into_iter().next().expect("one output"))
}

/// Order-0 and order-1 coefficients from their dedicated ODEs.
pub fn leading_coefficients(
    model: &AffineDiffusion,
    u: &[f64],
    t: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>, f64)> {
    let d = model.dim();
    if u.len() != d {
        return Err(Error::Domain(format!("u has length {}, expected {d}", u.len())));
    }
    let y = integrate_series(model, u, t, 0.0, tol)?;
    let w = d + 1;
    Ok((y[..d].to_vec(), y[d], y[w..w + d].to_vec(), y[w + d]))
}

/// Degrees fitted beyond the requested order to absorb the ε-tail.
const SERIES_EXTRA_DEGREES: usize = 3;

/// Coefficients `ψ⁽ⁿ⁾, φ⁽ⁿ⁾` for `n ≤ order`. Orders 0 and 1 come from
/// their own ODEs; the rest from a polynomial fit in ε of the homogenized
/// values with the first two orders removed.
pub fn series(
    model: &AffineDiffusion,
    u: &[f64],
    t: f64,
    order: usize,
    opts: SeriesOptions,
) -> Result<HomogenizationSeries> {
    let d = model.dim();
    let (p0, f0, p1, f1) = leading_coefficients(model, u, t, opts.tol)?;
    let mut psi = vec![p0, p1];
    let mut phi = vec![f0, f1];
    let mut condition: f64 = 1.0;
    if order >= 2 {
        let grid = dyadic(opts.eps0, opts.levels);
        let w = d + 1;
        let mut rem = Vec::with_capacity(grid.len());
        for &eps in &grid {
            let y = integrate_series(model, u, t, eps, opts.tol)?;
            rem.push(y[2 * w..3 * w].to_vec());
        }
        let degree = (order - 2 + SERIES_EXTRA_DEGREES).min(grid.len().saturating_sub(2));
        if degree < order - 2 {
            return Err(Error::InvalidParameter(format!("{} fit levels cannot resolve order {order}", opts.levels)));
        }
        let mut fitted = vec![vec![0.0; w]; degree + 1];
        for comp in 0..w {
            let ys: Vec<f64> = rem.iter().map(|r| r[comp]).collect();
            let fit = polyfit(&grid, &ys, degree)?;
            condition = condition.max(fit.condition);
            for (k, c) in fit.coeffs.iter().enumerate() {
                fitted[k][comp] = *c;
            }
        }
        for row in fitted {
            phi.push(row[d]);
            psi.push(row[..d].to_vec());
        }
    }
    psi.truncate(order + 1);
    phi.truncate(order + 1);
    Ok(HomogenizationSeries { u: u.to_vec(), t, psi, phi, condition })
}

/// `ψ⁽¹⁾` and `φ⁽¹⁾` by fitting `(homogenized - order 0)/ε` on the ε-grid.
pub fn fitted_first_order(
    model: &AffineDiffusion,
    u: &[f64],
    t: f64,
    opts: SeriesOptions,
    degree: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = model.dim();
    let (p0, f0, _, _) = leading_coefficients(model, u, t, opts.tol)?;
    let grid = dyadic(opts.eps0, opts.levels);
    let mut cols = vec![Vec::with_capacity(grid.len()); d + 1];
    for &eps in &grid {
        let (p, f) = homogenized_direct(model, u, eps, t, opts.tol)?;
        for i in 0..d {
            cols[i].push((p[i] - p0[i]) / eps);
        }
        cols[d].push((f - f0) / eps);
    }
    let mut out = Vec::with_capacity(d + 1);
    for col in &cols {
        out.push(polyfit(&grid, col, degree)?.coeffs[0]);
    }
    let phi1 = out.pop().expect("d + 1 columns");
    Ok((out, phi1))
}

/// `Λ̂⁽ⁿ⁾(u)` at initial state `x`, for `n ≤ order`: the series of
/// `φ^ε(-u, 1) + ⟨x, ψ^ε(-u, 1)⟩`.
pub fn lambda_hat(
    model: &AffineDiffusion,
    u: &[f64],
    x: &[f64],
    order: usize,
    opts: SeriesOptions,
) -> Result<Vec<f64>> {
    let neg: Vec<f64> = u.iter().map(|v| -v).collect();
    Ok(series(model, &neg, 1.0, order, opts)?.transform_coefficients(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(d: usize) -> AffineDiffusion {
        AffineDiffusion {
            m: 0,
            n: d,
            a: DMatrix::zeros(d, d),
            b: DVector::from_element(d, 1.0),
            c: 0.0,
            alpha: vec![DMatrix::zeros(d, d); d],
            beta: (0..d).map(|i| -DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })).collect(),
            gamma: vec![0.0; d],
        }
        .validated()
        .unwrap()
    }

    fn quadratic() -> AffineDiffusion {
        AffineDiffusion {
            m: 1,
            n: 0,
            a: DMatrix::zeros(1, 1),
            b: DVector::zeros(1),
            c: 0.0,
            alpha: vec![DMatrix::from_element(1, 1, 0.5)],
            beta: vec![DVector::zeros(1)],
            gamma: vec![0.0],
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn linear_model_closed_form() {
        let model = linear(2);
        let u = [0.7, -1.3];
        let sol = solve_riccati_at(&model, &u, &[0.5, 1.0, 2.0], 1e-12).unwrap();
        for (k, t) in [0.5f64, 1.0, 2.0].iter().enumerate() {
            for (got, ui) in sol.psi[k].iter().zip(u) {
                assert!((got - ui * (-t).exp()).abs() < 1e-10);
            }
            assert!((sol.phi[k] - (u[0] + u[1]) * (1.0 - (-t).exp())).abs() < 1e-10);
        }
        let (p, _) = homogenized(&model, &u, 0.1, 1.0, 1e-12).unwrap();
        assert!((p[0] - u[0] * (-0.1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rest_point() {
        let model = quadratic();
        let sol = solve_riccati(&model, &[0.0], 3.0, 1e-10).unwrap();
        assert_eq!(sol.final_psi(), &[0.0]);
        assert_eq!(sol.final_phi(), 0.0);
    }

    #[test]
    fn quadratic_blow_up() {
        // ψ' = ψ²/4, ψ(0) = 2 blows up at t = 2.
        let err = solve_riccati(&quadratic(), &[2.0], 3.0, 1e-10).unwrap_err();
        match err {
            Error::BlowUp { time } => assert!((time - 2.0).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn purely_quadratic_series_has_no_corrections() {
        let s = series(&quadratic(), &[0.8], 1.0, 5, SeriesOptions::default()).unwrap();
        for n in 1..=5 {
            assert!(s.psi[n][0].abs() < 1e-8 && s.phi[n].abs() < 1e-8, "n={n}: {:?}", s.psi[n]);
        }
        assert!((s.psi[0][0] - 0.8 / (1.0 - 0.2)).abs() < 1e-10);
    }

    #[test]
    fn inadmissible_models_are_rejected() {
        let mut m = quadratic();
        m.alpha[0][(0, 0)] = -1.0;
        assert!(m.validated().is_err());
        let mut m = linear(1);
        m.c = -0.5;
        assert!(m.validated().is_err());
        let mut m = linear(1);
        m.b = DVector::zeros(2);
        assert!(m.validated().is_err());
    }
}
