//! The rank-2 meromorphic connection on the 4-punctured torus built from a flat
//! line-bundle connection `d + pi a dz - pi x dzbar`, together with the
//! rank-1 exceptional families with pole coefficient `-pi/12` or `+pi/12`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::moduli::{self, AffineConnCoord};
use crate::theta::{self, ThetaFn, DEFAULT_POLE_RADIUS};

const I: Complex64 = Complex64::new(0.0, 1.0);

type CoeffFn = Arc<dyn Fn(Complex64) -> Mat2 + Send + Sync>;

/// Normalization constant `c(y)` with `c^2 theta(y) theta(-y) / theta'(0)^2 = 1/36`.
///
/// Since `theta(y) theta(-y) = -theta_1(y)^2`, the square root has the global
/// single-valued branch `c(y) = i theta'(0) e^{i pi y} / (6 theta(y))`. At
/// `y = 0.3` this is the principal root, so it is the continuation from there.
pub fn coeff_c(th: &ThetaFn, y: Complex64) -> Result<Complex64> {
    if theta::lattice_distance(y) < DEFAULT_POLE_RADIUS {
        return Err(Error::Pole {
            at: y,
            radius: DEFAULT_POLE_RADIUS,
        });
    }
    let tp0 = th.theta_prime(Complex64::new(0.0, 0.0));
    Ok(I * tp0 * (I * PI * y).exp() / (6.0 * th.theta(y)))
}

/// The second fundamental forms `(gamma_plus(z), gamma_minus(z))` as `dz` coefficients.
pub fn gamma_pair(th: &ThetaFn, y: Complex64, z: Complex64) -> Result<(Complex64, Complex64)> {
    let c = coeff_c(th, y)?;
    gamma_pair_with(th, c, y, z)
}

fn gamma_pair_with(
    th: &ThetaFn,
    c: Complex64,
    y: Complex64,
    z: Complex64,
) -> Result<(Complex64, Complex64)> {
    if theta::lattice_distance(z) < DEFAULT_POLE_RADIUS {
        return Err(Error::Pole {
            at: z,
            radius: DEFAULT_POLE_RADIUS,
        });
    }
    Ok(gamma_unchecked(th, c, y, z))
}

#[inline]
fn gamma_unchecked(th: &ThetaFn, c: Complex64, y: Complex64, z: Complex64) -> (Complex64, Complex64) {
    let tz = th.theta(z);
    let e = (2.0 * PI * I * y * z.im).exp();
    let plus = c * th.theta(z - y) / tz / e;
    let minus = c * th.theta(z + y) / tz * e;
    (plus, minus)
}

/// A trace-free matrix-valued 1-form `A_dz dz + A_dzbar dzbar` on `C/(2Z+2iZ)`.
#[derive(Clone)]
pub struct MatrixOneForm {
    dz_part: CoeffFn,
    dzbar_part: CoeffFn,
    /// Poles inside the period square `[0,2) x [0,2)`, repeated with period 2.
    pub pole_set: Vec<Complex64>,
}

impl fmt::Debug for MatrixOneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixOneForm")
            .field("pole_set", &self.pole_set)
            .finish_non_exhaustive()
    }
}

/// The four punctures `0, 1, i, 1+i` of `C/(2Z+2iZ)`.
pub fn torus_punctures() -> Vec<Complex64> {
    vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(1.0, 1.0),
    ]
}

impl MatrixOneForm {
    pub fn new<F, G>(dz_part: F, dzbar_part: G, pole_set: Vec<Complex64>) -> Self
    where
        F: Fn(Complex64) -> Mat2 + Send + Sync + 'static,
        G: Fn(Complex64) -> Mat2 + Send + Sync + 'static,
    {
        Self {
            dz_part: Arc::new(dz_part),
            dzbar_part: Arc::new(dzbar_part),
            pole_set,
        }
    }

    /// The zero form.
    pub fn zero() -> Self {
        Self::new(|_| Mat2::zeros(), |_| Mat2::zeros(), Vec::new())
    }

    /// Constant form with the given `dz` and `dzbar` coefficients.
    pub fn constant(dz: Mat2, dzbar: Mat2) -> Self {
        Self::new(move |_| dz, move |_| dzbar, Vec::new())
    }

    /// Diagonal line-bundle form `diag(1, -1) (pi a dz - pi x dzbar)`.
    pub fn diagonal(p: AffineConnCoord) -> Self {
        let dz = Mat2::new(PI * p.a, 0.0.into(), 0.0.into(), -PI * p.a);
        let dzbar = Mat2::new(-PI * p.x, 0.0.into(), 0.0.into(), PI * p.x);
        Self::constant(dz, dzbar)
    }

    pub fn dz(&self, z: Complex64) -> Mat2 {
        (self.dz_part)(z)
    }

    pub fn dzbar(&self, z: Complex64) -> Mat2 {
        (self.dzbar_part)(z)
    }

    /// Contraction with a tangent vector `v`: `A_dz v + A_dzbar conj(v)`.
    pub fn contract(&self, z: Complex64, v: Complex64) -> Mat2 {
        self.dz(z) * v + self.dzbar(z) * v.conj()
    }

    /// Distance from `z` to the nearest pole (poles repeat with period 2 in both directions).
    pub fn pole_distance(&self, z: Complex64) -> f64 {
        self.pole_set
            .iter()
            .map(|&p| {
                let d = z - p;
                let w = Complex64::new(d.re - 2.0 * (d.re / 2.0).round(), d.im - 2.0 * (d.im / 2.0).round());
                w.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Conjugate by a constant matrix: `g^{-1} A g`.
    pub fn conjugated(&self, g: Mat2) -> Result<Self> {
        let gi = g
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular gauge matrix".into()))?;
        let a = self.dz_part.clone();
        let b = self.dzbar_part.clone();
        Ok(Self::new(
            move |z| gi * a(z) * g,
            move |z| gi * b(z) * g,
            self.pole_set.clone(),
        ))
    }

    /// Multiply both parts by a scalar.
    pub fn scaled(&self, s: Complex64) -> Self {
        let a = self.dz_part.clone();
        let b = self.dzbar_part.clone();
        Self::new(move |z| a(z) * s, move |z| b(z) * s, self.pole_set.clone())
    }

    /// Sum of two forms (pole sets are merged).
    pub fn plus(&self, other: &Self) -> Self {
        let (a1, b1) = (self.dz_part.clone(), self.dzbar_part.clone());
        let (a2, b2) = (other.dz_part.clone(), other.dzbar_part.clone());
        let mut poles = self.pole_set.clone();
        for p in &other.pole_set {
            if !poles.iter().any(|q| (q - p).norm() < 1e-14) {
                poles.push(*p);
            }
        }
        Self::new(move |z| a1(z) + a2(z), move |z| b1(z) + b2(z), poles)
    }
}

/// The connection 1-form in the frame `(1, 1*)`:
///
/// ```text
/// [ pi a dz - pi x dzbar     gamma_minus dz         ]
/// [ gamma_plus dz            -pi a dz + pi x dzbar  ]
/// ```
///
/// with `y = -2x`. Fails when `x` is congruent to 0 modulo `L'`.
pub fn build_form(p: AffineConnCoord) -> Result<MatrixOneForm> {
    build_form_with(&ThetaFn::default(), p)
}

pub fn build_form_with(th: &ThetaFn, p: AffineConnCoord) -> Result<MatrixOneForm> {
    let y = -2.0 * p.x;
    if moduli::lattice_distance(p.x) * 2.0 < DEFAULT_POLE_RADIUS {
        return Err(Error::Degenerate(format!(
            "x = {} is congruent to 0 modulo the half lattice: no holomorphic connection exists",
            p.x
        )));
    }
    let c = coeff_c(th, y)?;
    let th = th.clone();
    let pa = PI * p.a;
    let px = PI * p.x;
    let dz = move |z: Complex64| {
        let (gp, gm) = gamma_unchecked(&th, c, y, z);
        Mat2::new(pa, gm, gp, -pa)
    };
    let dzbar = Mat2::new(-px, 0.0.into(), 0.0.into(), px);
    Ok(MatrixOneForm::new(dz, move |_| dzbar, torus_punctures()))
}

/// Rank-1 family `t dzbar + (sign pi/(12 t) + t e(t)) dz` near an exceptional point.
///
/// `sign = -1` is the limit at the trivial holomorphic structure, `sign = +1`
/// the limit at the non-stable extension. `e_coeffs[k]` is the coefficient of
/// `t^{2k}` in `e`, so `t e(t)` and hence the whole form are odd in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalFamily {
    pub sign: i8,
    pub e_coeffs: Vec<Complex64>,
}

/// Coefficients `(dzbar, dz)` of a rank-1 form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbelianForm {
    pub dzbar: Complex64,
    pub dz: Complex64,
}

impl ExceptionalFamily {
    pub fn new(sign: i8, e_coeffs: Vec<Complex64>) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Config(format!("exceptional sign must be +1 or -1, got {sign}")));
        }
        Ok(Self { sign, e_coeffs })
    }

    /// The family with `e = 0` and pole coefficient `+pi/12`.
    pub fn uniformization_limit() -> Self {
        Self {
            sign: 1,
            e_coeffs: Vec::new(),
        }
    }

    /// Pole coefficient of the `dz` part at `t = 0`.
    pub fn pole_coefficient(&self) -> f64 {
        self.sign as f64 * PI / 12.0
    }

    fn e(&self, t: Complex64) -> Complex64 {
        let t2 = t * t;
        self.e_coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t2 + c)
    }
}

pub fn exceptional_form(fam: &ExceptionalFamily, t: Complex64) -> Result<AbelianForm> {
    if t.norm() == 0.0 {
        return Err(Error::Pole {
            at: t,
            radius: 0.0,
        });
    }
    Ok(AbelianForm {
        dzbar: t,
        dz: fam.pole_coefficient() / t + t * fam.e(t),
    })
}
