//! Rate-function machinery for a limiting CGF Λ⁽⁰⁾.
//!
//! With the sign convention `Λ(ε,u) = ε log E[exp(-u X_ε / ε)]`, the critical
//! point `u*(z)` solves `∂Λ⁽⁰⁾(u) = -z`, the rate is
//! `[Λ⁽⁰⁾]*(z) = -z u*(z) - Λ⁽⁰⁾(u*(z))`, and its minimum sits at
//! `z̄ = -∂Λ⁽⁰⁾(0)`.

use crate::error::{Error, Result};
use crate::smooth::SmoothScalarFn;

/// Nodes per side of zero in the bracket table.
const NODES_PER_SIDE: usize = 256;
const NEWTON_CAP: usize = 50;
const SLOPE_ROUNDOFF: f64 = 1e-12;

/// The expansion triple Λ⁽⁰⁾, Λ⁽¹⁾, Λ⁽²⁾ on the open interval `I`.
#[derive(Debug, Clone)]
pub struct CgfExpansion {
    pub lambda0: SmoothScalarFn,
    pub lambda1: SmoothScalarFn,
    pub lambda2: SmoothScalarFn,
    pub domain: (f64, f64),
}

impl CgfExpansion {
    /// Validates `0 ∈ I` and `Λ⁽ⁱ⁾(0) = 0`.
    pub fn new(
        lambda0: SmoothScalarFn,
        lambda1: SmoothScalarFn,
        lambda2: SmoothScalarFn,
        domain: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < 0.0 && 0.0 < hi) {
            return Err(Error::Domain(format!("CGF domain ({lo}, {hi}) must contain 0")));
        }
        for (i, f) in [&lambda0, &lambda1, &lambda2].into_iter().enumerate() {
            let v = f.eval(0.0);
            if v.abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("Λ⁽{i}⁾(0) = {v:e}, expected 0")));
            }
        }
        Ok(Self { lambda0, lambda1, lambda2, domain })
    }

    /// The Gaussian family N(0, ε): Λ⁽⁰⁾ = u²/2, Λ⁽¹⁾ = Λ⁽²⁾ = 0.
    pub fn gaussian() -> Self {
        Self::gaussian_with(1.0, 0.0, 0.0)
    }

    /// Λ⁽⁰⁾ = s²u²/2 − m u with a linear Λ⁽¹⁾ = l₁u and Λ⁽²⁾ = 0.
    pub fn gaussian_with(variance: f64, mean: f64, lambda1_slope: f64) -> Self {
        let lambda0 = SmoothScalarFn::polynomial(&[0.0, -mean, 0.5 * variance]);
        let lambda1 = SmoothScalarFn::polynomial(&[0.0, lambda1_slope]);
        let lambda2 = SmoothScalarFn::constant(0.0);
        Self { lambda0, lambda1, lambda2, domain: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    /// Replaces Λ⁽²⁾ without the `Λ⁽²⁾(0) = 0` check. Useful for synthetic
    /// triples such as a constant second-order term.
    pub fn with_lambda2(mut self, lambda2: SmoothScalarFn) -> Self {
        self.lambda2 = lambda2;
        self
    }

    pub fn contains(&self, u: f64) -> bool {
        self.domain.0 < u && u < self.domain.1
    }

    /// Checks that ∂Λ⁽⁰⁾ is strictly increasing on `grid`.
    pub fn check_monotone(&self, grid: &[f64]) -> Result<()> {
        let mut prev: Option<(f64, f64)> = None;
        for &u in grid.iter().filter(|u| self.contains(**u)) {
            let g = self.lambda0.derivative(u, 1);
            if let Some((pu, pg)) = prev {
                if !(g > pg) {
                    return Err(Error::InvalidParameter(format!("∂Λ⁽⁰⁾ not increasing between u = {pu} and u = {u}")));
                }
            }
            prev = Some((u, g));
        }
        Ok(())
    }
}

/// Rate data built from a CGF triple, with an eagerly built bracket table
/// of `(u, ∂Λ⁽⁰⁾(u))` pairs.
#[derive(Debug, Clone)]
pub struct RateData {
    source: CgfExpansion,
    table: Vec<(f64, f64)>,
}

fn side_nodes(end: f64) -> Vec<f64> {
    // Distances to a finite endpoint shrink geometrically from |end| to
    // |end|·1e-13; an infinite side spans magnitudes 1e-6..1e6.
    (0..NODES_PER_SIDE)
        .map(|j| {
            let s = j as f64 / (NODES_PER_SIDE - 1) as f64;
            if end.is_finite() {
                end - end * 10f64.powf(-13.0 * s)
            } else {
                end.signum() * 10f64.powf(-6.0 + 12.0 * s)
            }
        })
        .collect()
}

fn not_increasing(lo: f64, hi: f64) -> Error {
    Error::InvalidParameter(format!("∂Λ⁽⁰⁾ not increasing between u = {lo} and u = {hi}"))
}

impl RateData {
    pub fn new(source: CgfExpansion) -> Result<Self> {
        let mut nodes: Vec<f64> = side_nodes(source.domain.0);
        nodes.extend(side_nodes(source.domain.1));
        nodes.push(0.0);
        nodes.retain(|u| source.contains(*u));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let slopes: Vec<(f64, f64)> =
            nodes.into_iter().map(|u| (u, source.lambda0.derivative(u, 1))).filter(|(_, g)| g.is_finite()).collect();
        let zero = slopes.partition_point(|&(u, _)| u < 0.0);
        // Walk outward from u = 0; nodes whose slope has saturated in
        // floating point are dropped, genuine decreases are errors.
        let mut right = vec![slopes[zero]];
        for &(u, g) in &slopes[zero + 1..] {
            let last = right[right.len() - 1];
            if g > last.1 {
                right.push((u, g));
            } else if g < last.1 - SLOPE_ROUNDOFF * (1.0 + last.1.abs()) {
                return Err(not_increasing(last.0, u));
            }
        }
        let mut left = vec![slopes[zero]];
        for &(u, g) in slopes[..zero].iter().rev() {
            let last = left[left.len() - 1];
            if g < last.1 {
                left.push((u, g));
            } else if g > last.1 + SLOPE_ROUNDOFF * (1.0 + last.1.abs()) {
                return Err(not_increasing(u, last.0));
            }
        }
        left.reverse();
        left.pop();
        left.extend(right);
        let table = left;
        if table.len() < 3 {
            return Err(Error::InvalidParameter("∂Λ⁽⁰⁾ is not strictly increasing near 0".into()));
        }
        Ok(Self { source, table })
    }

    pub fn cgf(&self) -> &CgfExpansion {
        &self.source
    }

    /// Critical point `u*(z)` solving `∂Λ⁽⁰⁾(u) = -z`.
    pub fn ustar(&self, z: f64) -> Result<f64> {
        let target = -z;
        let t = &self.table;
        if t.is_empty() || !(target >= t[0].1 && target <= t[t.len() - 1].1) {
            return Err(Error::BracketFailure { target });
        }
        let j = t.partition_point(|&(_, g)| g < target);
        if j < t.len() && t[j].1 == target {
            return Ok(t[j].0);
        }
        let (mut lo, mut hi) = (t[j - 1].0, t[j].0);
        let l0 = &self.source.lambda0;
        let mut u = 0.5 * (lo + hi);
        for _ in 0..NEWTON_CAP {
            let g = l0.derivative(u, 1) - target;
            if g == 0.0 {
                return Ok(u);
            }
            if g < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let h = l0.derivative(u, 2);
            let newton = u - g / h;
            let next = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - u).abs() <= 2.0 * f64::EPSILON * u.abs().max(1e-300) || hi - lo <= f64::EPSILON * u.abs() {
                return Ok(next);
            }
            u = next;
        }
        // Bisection fallback once the Newton budget is spent.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if l0.derivative(mid, 1) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The rate function `[Λ⁽⁰⁾]*(z)`.
    pub fn rate(&self, z: f64) -> Result<f64> {
        let u = self.ustar(z)?;
        Ok(self.rate_at(z, u))
    }

    /// The rate at `z` given its critical point.
    pub fn rate_at(&self, z: f64, ustar: f64) -> f64 {
        (-z * ustar - self.source.lambda0.eval(ustar)).max(0.0)
    }

    /// `d(z) = sqrt(2 [Λ⁽⁰⁾]*(z))`.
    pub fn distance(&self, z: f64) -> Result<f64> {
        Ok((2.0 * self.rate(z)?).sqrt())
    }

    /// `z*(u) = -∂Λ⁽⁰⁾(u)`, the inverse of [`RateData::ustar`].
    pub fn zstar(&self, u: f64) -> Result<f64> {
        if !self.source.contains(u) {
            return Err(Error::Domain(format!("u = {u} outside ({}, {})", self.source.domain.0, self.source.domain.1)));
        }
        Ok(-self.source.lambda0.derivative(u, 1))
    }

    /// Location of the rate minimum, `z̄ = z*(0)`.
    pub fn rate_minimizer(&self) -> f64 {
        -self.source.lambda0.derivative(0.0, 1)
    }

    /// Derivatives 2–4 of `φ_u(z) = u z + d²(z)/2` at `z*(u)`.
    pub fn phi_u_derivatives(&self, u: f64) -> Result<(f64, f64, f64)> {
        if !self.source.contains(u) {
            return Err(Error::Domain(format!("u = {u} outside the CGF domain")));
        }
        let l = &self.source.lambda0;
        let (l2, l3, l4) = (l.derivative(u, 2), l.derivative(u, 3), l.derivative(u, 4));
        if !(l2 > 1e-14) {
            return Err(Error::DegenerateCurvature { at: u, curvature: l2 });
        }
        Ok((1.0 / l2, l3 / l2.powi(3), (3.0 * l3 * l3 - l2 * l4) / l2.powi(5)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> RateData {
        RateData::new(CgfExpansion::gaussian()).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        let rd = gauss();
        assert!((rd.ustar(1.0).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(rd.ustar(0.0).unwrap(), 0.0);
        assert!((rd.rate(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rd.rate(0.0).unwrap(), 0.0);
        assert!((rd.rate(-2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((rd.distance(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((rd.distance(-3.0).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(rd.distance(0.0).unwrap(), 0.0);
        assert_eq!(rd.zstar(1.0).unwrap(), -1.0);
        assert_eq!(rd.zstar(0.0).unwrap(), 0.0);
        assert_eq!(rd.phi_u_derivatives(0.3).unwrap(), (1.0, 0.0, 0.0));
    }

    #[test]
    fn cubic_cgf_phi_derivatives() {
        let cgf = CgfExpansion::new(
            SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5, 1.0 / 6.0]),
            SmoothScalarFn::constant(0.0),
            SmoothScalarFn::constant(0.0),
            (-1.0, f64::INFINITY),
        )
        .unwrap();
        let rd = RateData::new(cgf).unwrap();
        let (p2, p3, p4) = rd.phi_u_derivatives(0.0).unwrap();
        assert!((p2 - 1.0).abs() < 1e-14 && (p3 - 1.0).abs() < 1e-14 && (p4 - 3.0).abs() < 1e-14);
        let u = 0.4;
        let (p2, p3, p4) = rd.phi_u_derivatives(u).unwrap();
        assert!((p2 - 1.0 / (1.0 + u)).abs() < 1e-14);
        assert!((p3 - 1.0 / (1.0 + u).powi(3)).abs() < 1e-14);
        assert!((p4 - 3.0 / (1.0 + u).powi(5)).abs() < 1e-14);
    }

    #[test]
    fn domain_and_degeneracy_errors() {
        let rd = gauss();
        assert!(rd.zstar(f64::INFINITY).is_err());
        let flat = CgfExpansion::new(
            SmoothScalarFn::polynomial(&[0.0, 1.0]),
            SmoothScalarFn::constant(0.0),
            SmoothScalarFn::constant(0.0),
            (-1.0, 1.0),
        )
        .unwrap();
        // A linear Λ⁽⁰⁾ has a constant slope: the table is not increasing.
        assert!(RateData::new(flat.clone()).is_err());
        let rd = RateData { source: flat, table: vec![(-0.5, 1.0)] };
        assert!(matches!(rd.phi_u_derivatives(0.0), Err(Error::DegenerateCurvature { .. })));
    }

    #[test]
    fn bracket_failure_outside_range() {
        // Λ⁽⁰⁾ = log cosh u has bounded slope (-1, 1).
        let cgf = CgfExpansion::new(
            SmoothScalarFn::new(|u: f64| u.cosh().ln()).with_derivative(f64::tanh),
            SmoothScalarFn::constant(0.0),
            SmoothScalarFn::constant(0.0),
            (f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        let rd = RateData::new(cgf).unwrap();
        assert!((rd.ustar(0.5).unwrap() + 0.5f64.atanh()).abs() < 1e-12);
        assert!(matches!(rd.ustar(2.0), Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn zero_must_be_in_domain() {
        let r = CgfExpansion::new(
            SmoothScalarFn::polynomial(&[0.0, 0.0, 0.5]),
            SmoothScalarFn::constant(0.0),
            SmoothScalarFn::constant(0.0),
            (0.5, 1.0),
        );
        assert!(r.is_err());
    }
}
