//! Dormand–Prince 5(4) integrator with adaptive step control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Mixed tolerance: each component must satisfy
    /// `|err| <= tol * (1 + max(|y|, |y_new|))`.
    pub tol: f64,
    /// First trial step; `None` picks `1e-3 * |t1 - t0|`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { tol: 1e-10, initial_step: None, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to each time in `outputs` (ascending,
/// all beyond `t0`), returning the state at every output time.
///
/// `guard` is consulted after every accepted step; returning `true` aborts
/// with [`Error::BlowUp`] at the current time.
pub fn integrate<F, G>(
    f: F,
    y0: &[f64],
    t0: f64,
    outputs: &[f64],
    opts: OdeOptions,
    guard: G,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: Fn(f64, &[f64], &mut [f64]),
    G: Fn(&[f64]) -> bool,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(outputs.len());
    let span = outputs.last().map_or(0.0, |&t1| (t1 - t0).abs());
    let mut h = opts.initial_step.unwrap_or(1e-3 * span).max(f64::MIN_POSITIVE);

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k[0]);

    for &target in outputs {
        assert!(target >= t, "output times must be ascending");
        while t < target {
            if stats.steps + stats.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow { time: t });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };

            for i in 0..n {
                tmp[i] = y[i] + step * A21 * k[0][i];
            }
            f(t + C2 * step, &tmp, &mut k[1]);
            for i in 0..n {
                tmp[i] = y[i] + step * (A31 * k[0][i] + A32 * k[1][i]);
            }
            f(t + C3 * step, &tmp, &mut k[2]);
            for i in 0..n {
                tmp[i] = y[i] + step * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            f(t + C4 * step, &tmp, &mut k[3]);
            for i in 0..n {
                tmp[i] = y[i] + step * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            f(t + C5 * step, &tmp, &mut k[4]);
            for i in 0..n {
                tmp[i] = y[i] + step * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
            }
            f(t + step, &tmp, &mut k[5]);
            for i in 0..n {
                y_new[i] = y[i] + step * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            f(t + step, &y_new, &mut k[6]);

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e =
                    step * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = opts.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
                err = err.max((e / sc).abs());
            }

            if err.is_nan() {
                // Non-finite stage values: shrink hard and retry.
                stats.rejected += 1;
                h = step * 0.1;
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::BlowUp { time: t });
                }
                continue;
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.steps += 1;
                if guard(&y) {
                    return Err(Error::BlowUp { time: t });
                }
                // Keep the pre-clamp step when the last step was shortened.
                h = if last { h.max(step * factor) } else { step * factor };
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow { time: t });
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
