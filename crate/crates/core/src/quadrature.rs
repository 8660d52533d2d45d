//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Panel budget before giving up.
pub const MAX_PANELS: usize = 1 << 15;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]` until the summed error estimate falls below
/// `max(tol.abs, tol.rel * |value|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult> {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Like [`integrate`], seeding the panel set with the given break points.
pub fn integrate_with_breaks(f: impl Fn(f64) -> f64, breaks: &[f64], tol: Tolerance) -> Result<QuadratureResult> {
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (value, error) = kronrod15(&f, w[0], w[1]);
        total += value;
        err += error;
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureNonConvergent { panels: heap.len(), error: f64::INFINITY });
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            // Re-sum to shed accumulated cancellation in the running totals.
            let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            return Ok(QuadratureResult { value, error, panels: heap.len() });
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureNonConvergent { panels: heap.len(), error: err });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureNonConvergent { panels: heap.len() + 1, error: err });
        }
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(6) - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x| (-x * x / 2.0).exp(), -20.0, 20.0, Tolerance::default()).unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn narrow_peak_is_resolved() {
        let eps = 1e-4;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (2.0 * eps)).exp();
        let r = integrate_with_breaks(f, &[-5.0, 0.3, 5.0], Tolerance { abs: 1e-15, rel: 1e-12 }).unwrap();
        let exact = (2.0 * std::f64::consts::PI * eps).sqrt();
        assert!((r.value / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn singular_integrand_runs_out_of_budget() {
        let err = integrate(|x: f64| 1.0 / x.abs().sqrt().powi(3), -1.0, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergent { .. }));
    }
}
