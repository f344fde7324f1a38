//! Theta function of the square torus C/(Z+iZ).
//!
//! The function is realized as `theta(z) = e^{i pi z} theta_1(z | i)`, which in
//! terms of `u = e^{2 pi i z}` reads
//!
//! ```text
//! theta(z) = -i sum_{n>=0} (-1)^n q^{(n+1/2)^2} (u^{n+1} - u^{-n}),   q = e^{-pi}.
//! ```
//!
//! It satisfies `theta(z+1) = theta(z)`,
//! `theta(z+i) = theta(z) exp(-2 pi i (z - (1+i)/2) + pi)` and has simple zeros
//! exactly on `Z + iZ`. It is not even; instead `theta(-z) = theta(z+i)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default number of series terms.
pub const DEFAULT_TRUNCATION: usize = 12;

/// Default exclusion radius around the pole lattice for section evaluation.
pub const DEFAULT_POLE_RADIUS: f64 = 1e-3;

/// Truncated series for the square-torus theta function.
#[derive(Debug, Clone)]
pub struct ThetaFn {
    truncation_order: usize,
    /// `(-1)^n q^{(n+1/2)^2}` for each retained term.
    coeffs: Vec<f64>,
}

impl Default for ThetaFn {
    fn default() -> Self {
        Self::new(DEFAULT_TRUNCATION)
    }
}

impl ThetaFn {
    pub fn new(truncation_order: usize) -> Self {
        let coeffs = (0..truncation_order)
            .map(|n| {
                let e = (n as f64 + 0.5).powi(2);
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * (-PI * e).exp()
            })
            .collect();
        Self {
            truncation_order,
            coeffs,
        }
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    /// The nome `e^{-pi}` of the square modulus `tau = i`.
    pub fn nome(&self) -> f64 {
        (-PI).exp()
    }

    /// theta(z).
    pub fn theta(&self, z: Complex64) -> Complex64 {
        self.eval(z).0
    }

    /// Derivative of theta, differentiated term by term.
    pub fn theta_prime(&self, z: Complex64) -> Complex64 {
        self.eval(z).1
    }

    /// `(theta(z), theta'(z))` from a single pass over the series.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let u = (2.0 * PI * I * z).exp();
        let u_inv = u.inv();
        let mut up = u; // u^{n+1}
        let mut um = Complex64::new(1.0, 0.0); // u^{-n}
        let mut val = Complex64::new(0.0, 0.0);
        let mut der = Complex64::new(0.0, 0.0);
        for (n, &c) in self.coeffs.iter().enumerate() {
            val += c * (up - um);
            der += c * ((n as f64 + 1.0) * up + n as f64 * um);
            up *= u;
            um *= u_inv;
        }
        (-I * val, 2.0 * PI * der)
    }

    /// Logarithmic derivative theta'/theta.
    pub fn log_derivative(&self, z: Complex64) -> Complex64 {
        let (v, d) = self.eval(z);
        d / v
    }

    /// The odd Jacobi function `theta_1(z | i) = e^{-i pi z} theta(z)`.
    pub fn theta1(&self, z: Complex64) -> Complex64 {
        (-I * PI * z).exp() * self.theta(z)
    }

    /// Trivializing section `s(z) = theta(z-x)/theta(z) exp(pi x (conj z - z))`
    /// of the line bundle with holomorphic structure `dbar - pi x dzbar`.
    pub fn bundle_section(&self, x: Complex64, z: Complex64, pole_radius: f64) -> Result<Complex64> {
        if lattice_distance(z) < pole_radius {
            return Err(Error::Pole {
                at: z,
                radius: pole_radius,
            });
        }
        let ratio = self.theta(z - x) / self.theta(z);
        Ok(ratio * (PI * x * (z.conj() - z)).exp())
    }
}

/// Distance from `z` to the nearest point of `Z + iZ`.
pub fn lattice_distance(z: Complex64) -> f64 {
    let d = z - Complex64::new(z.re.round(), z.im.round());
    d.norm()
}

/// Right-hand factor of the quasi-period relation in the imaginary direction.
pub fn quasi_period_factor(z: Complex64) -> Complex64 {
    (-2.0 * PI * I * (z - Complex64::new(0.5, 0.5)) + PI).exp()
}

/// Largest residuals of the theta invariants over a point set.
///
/// Quasi-period residuals are relative to `max(1, |value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSuiteReport {
    pub points: usize,
    /// `theta(z+1) = theta(z)`.
    pub real_period: f64,
    /// `theta(z+i) = theta(z) * quasi_period_factor(z)`.
    pub quasi_period: f64,
    /// `|theta|` on the lattice points `m + n i`, `|m|, |n| <= 1`, relative to
    /// its size at the adjacent cell centre.
    pub lattice_zeros: f64,
    /// `|winding number - 1|` of theta around the unit cell centred at 0,
    /// so the lattice points are the only zeros.
    pub zero_count: f64,
}

impl ThetaSuiteReport {
    /// Names of the checks whose residual exceeds `tol`.
    pub fn failures(&self, tol: f64) -> Vec<&'static str> {
        let checks = [
            ("real_period", self.real_period),
            ("quasi_period", self.quasi_period),
            ("lattice_zeros", self.lattice_zeros),
            ("zero_count", self.zero_count),
        ];
        checks
            .iter()
            .filter(|(_, r)| !(*r <= tol))
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        [self.real_period, self.quasi_period, self.lattice_zeros, self.zero_count]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Samples per side for the winding number.
const WINDING_SAMPLES: usize = 512;

/// Run the invariant checks on `points`.
pub fn invariant_suite(th: &ThetaFn, points: &[Complex64]) -> ThetaSuiteReport {
    let mut real_period: f64 = 0.0;
    let mut quasi_period: f64 = 0.0;
    for &z in points {
        let t = th.theta(z);
        real_period = real_period.max((th.theta(z + 1.0) - t).norm() / t.norm().max(1.0));
        let ti = th.theta(z + I);
        quasi_period = quasi_period.max((ti - t * quasi_period_factor(z)).norm() / ti.norm().max(1.0));
    }
    let mut lattice_zeros: f64 = 0.0;
    for m in -1..=1 {
        for n in -1..=1 {
            let p = Complex64::new(m as f64, n as f64);
            let scale = th.theta(p + Complex64::new(0.5, 0.5)).norm().max(1.0);
            lattice_zeros = lattice_zeros.max(th.theta(p).norm() / scale);
        }
    }
    ThetaSuiteReport {
        points: points.len(),
        real_period,
        quasi_period,
        lattice_zeros,
        zero_count: (winding_number(th) - 1.0).abs(),
    }
}

/// Winding number of theta around the boundary of `[-1/2, 1/2]^2`.
fn winding_number(th: &ThetaFn) -> f64 {
    let corners = [
        Complex64::new(-0.5, -0.5),
        Complex64::new(0.5, -0.5),
        Complex64::new(0.5, 0.5),
        Complex64::new(-0.5, 0.5),
    ];
    let mut total = 0.0;
    let mut prev = th.theta(corners[0]);
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        for j in 1..=WINDING_SAMPLES {
            let v = th.theta(a + (b - a) * (j as f64 / WINDING_SAMPLES as f64));
            total += (v / prev).arg();
            prev = v;
        }
    }
    total / (2.0 * PI)
}
