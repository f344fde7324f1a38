//! Adaptive Dormand-Prince 5(4) integration of the matrix ODE `Y' = K(s) Y`.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use num_complex::Complex64;

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step statistics of one integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Integrate `Y' = K(s) Y` from `s0` to `s1` starting at `y0`.
///
/// `rtol` and `atol` both equal `tol`; the step is accepted when the scaled
/// embedded error estimate is at most 1.
pub fn integrate<F>(k: F, s0: f64, s1: f64, y0: Mat2, tol: f64, stats: &mut Stats) -> Result<Mat2>
where
    F: Fn(f64) -> Mat2,
{
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let h_min = 1e-13 * span.abs();
    let mut h = dir * (0.05 * span.abs()).min(tol.powf(0.2) * span.abs());
    let mut s = s0;
    let mut y = y0;
    let mut k1 = k(s) * y;
    let max_steps = 2_000_000;
    for _ in 0..max_steps {
        if (s1 - s) * dir <= 0.0 {
            return Ok(y);
        }
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        let hc = r(h);
        let k2 = k(s + C2 * h) * (y + k1 * hc * r(A21));
        let k3 = k(s + C3 * h) * (y + (k1 * r(A31) + k2 * r(A32)) * hc);
        let k4 = k(s + C4 * h) * (y + (k1 * r(A41) + k2 * r(A42) + k3 * r(A43)) * hc);
        let k5 = k(s + C5 * h)
            * (y + (k1 * r(A51) + k2 * r(A52) + k3 * r(A53) + k4 * r(A54)) * hc);
        let s_new = s + h;
        let k6 = k(s_new)
            * (y + (k1 * r(A61) + k2 * r(A62) + k3 * r(A63) + k4 * r(A64) + k5 * r(A65)) * hc);
        let y_new = y + (k1 * r(B1) + k3 * r(B3) + k4 * r(B4) + k5 * r(B5) + k6 * r(B6)) * hc;
        let k7 = k(s_new) * y_new;
        let e = (k1 * r(E1) + k3 * r(E3) + k4 * r(E4) + k5 * r(E5) + k6 * r(E6) + k7 * r(E7)) * hc;
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let sc = tol + tol * y[i].norm().max(y_new[i].norm());
            err = err.max(e[i].norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::StepUnderflow { s, h });
        }
        if err <= 1.0 {
            s = s_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < h_min {
                return Err(Error::StepUnderflow { s, h });
            }
        }
    }
    Err(Error::NonConvergence {
        what: "adaptive integration",
        iterations: max_steps,
        residual: (s1 - s).abs(),
    })
}

/// Convenience wrapper that integrates from the identity.
pub fn fundamental_solution<F>(k: F, s0: f64, s1: f64, tol: f64) -> Result<Mat2>
where
    F: Fn(f64) -> Mat2,
{
    let mut st = Stats::default();
    integrate(k, s0, s1, linalg::identity(), tol, &mut st)
}
