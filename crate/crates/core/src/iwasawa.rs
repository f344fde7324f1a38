//! Loop-group Iwasawa factorization `Psi = F B` on circle samples and simple
//! factor dressing.
//!
//! The positive factor is obtained from the spectral factorization
//! `Psi^* Psi = B^* B` on the unit circle: with `X = B^{-1} = sum_{j>=0} X_j lambda^j`
//! the product `(Psi^* Psi) X = B^*` has no positive Fourier modes, which is a
//! block Toeplitz system for the coefficients `X_j`. The finite section is
//! solved and the result refined by factoring the remaining non-unitary part.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};

/// Frames sampled on unit-circle nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSample {
    pub lambda_nodes: Vec<Complex64>,
    pub frames: Vec<Mat2>,
}

/// Equispaced nodes `exp(2 pi i (j + offset) / n)`.
pub fn circle_nodes(n: usize, offset: f64) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + offset) / n as f64))
        .collect()
}

impl LoopSample {
    /// Frames at equispaced nodes with the given offset (in units of the node spacing).
    pub fn new(frames: Vec<Mat2>, offset: f64) -> Result<Self> {
        let n = frames.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "loop samples need a power-of-two node count, got {n}"
            )));
        }
        for (j, f) in frames.iter().enumerate() {
            let d = f.determinant();
            if (d - 1.0).norm() > 1e-8 {
                return Err(Error::AtNode {
                    index: j,
                    source: Box::new(Error::Degenerate(format!("frame determinant {d}"))),
                });
            }
        }
        Ok(Self {
            lambda_nodes: circle_nodes(n, offset),
            frames,
        })
    }

    /// Offset of the first node, in units of the node spacing.
    pub fn offset(&self) -> f64 {
        let n = self.frames.len() as f64;
        let a = self.lambda_nodes[0].arg();
        let a = if a < 0.0 { a + 2.0 * PI } else { a };
        a * n / (2.0 * PI)
    }
}

/// Fourier coefficients of matrix samples on offset nodes.
///
/// Entry `k` of the result (for `k < n/2`) is the coefficient of `lambda^k`
/// and entry `n - k` that of `lambda^{-k}`.
#[derive(Debug, Clone)]
pub struct FourierLoop {
    pub coeffs: Vec<Mat2>,
}

impl FourierLoop {
    pub fn from_samples(samples: &[Mat2], offset: f64) -> Self {
        let n = samples.len();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut coeffs = vec![Mat2::zeros(); n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for e in 0..4 {
            for (b, s) in buf.iter_mut().zip(samples) {
                *b = s[e];
            }
            fft.process(&mut buf);
            for (k, c) in coeffs.iter_mut().enumerate() {
                let m = signed_mode(k, n);
                let shift = Complex64::from_polar(1.0, -2.0 * PI * m as f64 * offset / n as f64);
                c[e] = buf[k] * shift / n as f64;
            }
        }
        Self { coeffs }
    }

    /// Coefficient of `lambda^m`.
    pub fn mode(&self, m: i64) -> Mat2 {
        let n = self.coeffs.len() as i64;
        if m.abs() >= n / 2 + (m > 0) as i64 {
            return Mat2::zeros();
        }
        self.coeffs[m.rem_euclid(n) as usize]
    }

    /// Evaluate the trigonometric interpolant at `lambda`. Modes below
    /// `floor` times the largest mode are dropped, which keeps the
    /// evaluation off the unit circle from amplifying roundoff.
    pub fn eval(&self, lambda: Complex64, floor: f64) -> Mat2 {
        let n = self.coeffs.len();
        let top = self
            .coeffs
            .iter()
            .map(linalg::max_abs)
            .fold(0.0, f64::max);
        let mut out = Mat2::zeros();
        for (k, c) in self.coeffs.iter().enumerate() {
            if linalg::max_abs(c) < floor * top {
                continue;
            }
            let m = signed_mode(k, n);
            out += c * lambda.powi(m as i32);
        }
        out
    }

    /// First `m >= 1` with both modes `±m` at most `noise` times the largest
    /// mode: where the decay of a band-limited loop meets its noise floor.
    pub fn band_limit(&self, noise: f64) -> usize {
        let n = self.coeffs.len() as i64;
        let top = self.coeffs.iter().map(linalg::max_abs).fold(0.0, f64::max);
        (1..n / 2)
            .find(|&m| linalg::max_abs(&self.mode(m)).max(linalg::max_abs(&self.mode(-m))) <= noise * top)
            .unwrap_or(n / 2) as usize
    }

    /// Sum of the modes with `|m| < band` at `lambda`. Unlike [`Self::eval`]
    /// this stays accurate off the circle when high modes carry noise.
    pub fn eval_band(&self, lambda: Complex64, band: usize) -> Mat2 {
        let mut out = self.mode(0);
        for m in 1..band as i64 {
            out += self.mode(m) * lambda.powi(m as i32) + self.mode(-m) * lambda.powi(-m as i32);
        }
        out
    }

    /// Largest entry among modes `m` with `|m| >= from`.
    pub fn tail(&self, from: usize) -> f64 {
        let n = self.coeffs.len();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| signed_mode(*k, n).unsigned_abs() as usize >= from)
            .map(|(_, c)| linalg::max_abs(c))
            .fold(0.0, f64::max)
    }

    /// Largest entry among negative modes.
    pub fn negative_part(&self) -> f64 {
        let n = self.coeffs.len();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| signed_mode(*k, n) < 0)
            .map(|(_, c)| linalg::max_abs(c))
            .fold(0.0, f64::max)
    }
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Settings of the factorization.
#[derive(Debug, Clone)]
pub struct IwasawaOptions {
    /// Number of Fourier modes kept in `B^{-1}`.
    pub truncation: usize,
    /// Target for the unitarity error of `F`.
    pub tol: f64,
    pub max_refinements: usize,
    /// Bound on the Fourier tail of the input beyond `n/4` modes, relative to its size.
    pub tail_tol: f64,
}

impl Default for IwasawaOptions {
    fn default() -> Self {
        Self {
            truncation: 16,
            tol: 1e-11,
            max_refinements: 10,
            tail_tol: 1e-6,
        }
    }
}

/// Result of [`unitarize_loop`].
#[derive(Debug, Clone)]
pub struct IwasawaResult {
    pub unitary: Vec<Mat2>,
    pub positive: Vec<Mat2>,
    /// `B(0)`: upper triangular with positive diagonal.
    pub b0: Mat2,
    /// `max_j ||Psi_j - F_j B_j||`.
    pub residual: f64,
    /// `max_j ||F_j F_j^* - Id||`.
    pub unitarity_error: f64,
    /// Largest negative Fourier mode of `B`.
    pub positive_defect: f64,
    pub refinements: usize,
}

/// One finite-section solve: returns the node values of `X = B^{-1}` and `B(0)`.
fn factor_once(psi: &[Mat2], offset: f64, k_max: usize) -> Result<(Vec<Mat2>, Mat2)> {
    let n = psi.len();
    let herm: Vec<Mat2> = psi.iter().map(|p| p.adjoint() * p).collect();
    let hf = FourierLoop::from_samples(&herm, offset);
    let dim = 2 * (k_max + 1);
    let mut t = DMatrix::<Complex64>::zeros(dim, dim);
    for m in 0..=k_max {
        for j in 0..=k_max {
            let blk = hf.mode(m as i64 - j as i64);
            for r in 0..2 {
                for c in 0..2 {
                    t[(2 * m + r, 2 * j + c)] = blk[(r, c)];
                }
            }
        }
    }
    let lu = t.lu();
    let mut y = vec![Mat2::zeros(); k_max + 1];
    for col in 0..2 {
        let mut rhs = DVector::<Complex64>::zeros(dim);
        rhs[col] = Complex64::new(1.0, 0.0);
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular Toeplitz section".into()))?;
        for (j, yj) in y.iter_mut().enumerate() {
            yj[(0, col)] = sol[2 * j];
            yj[(1, col)] = sol[2 * j + 1];
        }
    }
    // Y_0^{-1} = B_0^* B_0 = L L^* with B_0 = L^*
    let y0inv = linalg::hermitian_part(
        &y[0]
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular leading block".into()))?,
    );
    let l = linalg::cholesky_lower(&y0inv)
        .ok_or_else(|| Error::Degenerate("leading block not positive definite".into()))?;
    let nodes = circle_nodes(n, offset);
    let x: Vec<Mat2> = nodes
        .iter()
        .map(|&lam| {
            let mut acc = Mat2::zeros();
            let mut p = Complex64::new(1.0, 0.0);
            for yj in &y {
                acc += yj * l * p;
                p *= lam;
            }
            acc
        })
        .collect();
    Ok((x, l.adjoint()))
}

/// Factor `Psi = F B` with `F` unitary on the nodes and `B` the boundary value
/// of a loop holomorphic in the disc with `B(0)` upper triangular and positive.
pub fn unitarize_loop(s: &LoopSample, opts: &IwasawaOptions) -> Result<IwasawaResult> {
    let n = s.frames.len();
    let offset = s.offset();
    if 2 * opts.truncation + 2 > n {
        return Err(Error::Config(format!(
            "truncation {} too large for {n} nodes",
            opts.truncation
        )));
    }
    let psi_f = FourierLoop::from_samples(&s.frames, offset);
    let scale = psi_f.coeffs.iter().map(linalg::max_abs).fold(0.0, f64::max);
    let tail = psi_f.tail(n / 4);
    if tail > opts.tail_tol * scale {
        return Err(Error::Rejected(format!(
            "Fourier tail {tail:.2e} of the loop exceeds {:.1e} relative",
            opts.tail_tol
        )));
    }
    let mut f = s.frames.clone();
    let mut x_total = vec![linalg::identity(); n];
    let mut b0_total = linalg::identity();
    let mut refinements = 0;
    let mut uerr = f.iter().map(linalg::unitarity_error).fold(0.0, f64::max);
    while uerr > opts.tol && refinements < opts.max_refinements {
        let (x, b0) = factor_once(&f, offset, opts.truncation)?;
        for j in 0..n {
            f[j] *= x[j];
            x_total[j] *= x[j];
        }
        b0_total = b0 * b0_total;
        refinements += 1;
        uerr = f.iter().map(linalg::unitarity_error).fold(0.0, f64::max);
    }
    if uerr > opts.tol {
        return Err(Error::NonConvergence {
            what: "Iwasawa refinement",
            iterations: refinements,
            residual: uerr,
        });
    }
    let positive: Vec<Mat2> = x_total
        .iter()
        .map(|x| x.try_inverse().unwrap_or_else(Mat2::zeros))
        .collect();
    let residual = (0..n)
        .map(|j| linalg::dist(&s.frames[j], &(f[j] * positive[j])))
        .fold(0.0, f64::max);
    let positive_defect = FourierLoop::from_samples(&positive, offset).negative_part();
    Ok(IwasawaResult {
        unitary: f,
        positive,
        b0: b0_total,
        residual,
        unitarity_error: uerr,
        positive_defect,
        refinements,
    })
}

/// The rational loop `d(lambda) = pi^L + s(lambda) pi^{L perp}` with
/// `s(lambda) = ((1 - 1/conj(lambda0)) / (1 - lambda0)) (lambda - lambda0) / (lambda - 1/conj(lambda0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleFactor {
    pub lambda_0: Complex64,
    pub line: [Complex64; 2],
}

impl SimpleFactor {
    pub fn new(lambda_0: Complex64, line: [Complex64; 2]) -> Result<Self> {
        if (lambda_0.norm() - 1.0).abs() < 1e-9 {
            return Err(Error::Degenerate(format!(
                "lambda_0 = {lambda_0} lies on the unit circle"
            )));
        }
        if line[0].norm() + line[1].norm() == 0.0 {
            return Err(Error::Degenerate("zero eigenline".into()));
        }
        Ok(Self { lambda_0, line })
    }

    pub fn scalar(&self, lambda: Complex64) -> Complex64 {
        let l0 = self.lambda_0;
        let inv = 1.0 / l0.conj();
        (1.0 - inv) / (1.0 - l0) * (lambda - l0) / (lambda - inv)
    }

    pub fn eval(&self, lambda: Complex64) -> Mat2 {
        let p = linalg::line_projection(self.line);
        let q = linalg::identity() - p;
        p + q * self.scalar(lambda)
    }

    pub fn eval_inverse(&self, lambda: Complex64) -> Mat2 {
        let p = linalg::line_projection(self.line);
        let q = linalg::identity() - p;
        p + q / self.scalar(lambda)
    }
}

/// Pointwise left multiplication of the frames by `d(lambda)`.
pub fn simple_factor_dress(s: &LoopSample, d: &SimpleFactor) -> LoopSample {
    LoopSample {
        lambda_nodes: s.lambda_nodes.clone(),
        frames: s
            .lambda_nodes
            .iter()
            .zip(&s.frames)
            .map(|(&l, f)| d.eval(l) * f)
            .collect(),
    }
}

/// Relative noise level at which the Fourier series of a unitary frame is cut
/// before it is continued off the circle.
pub const FRAME_NOISE: f64 = 1e-7;

/// Dressed unitary frame `d_L F d_{L'}^{-1}` with `L' = F(lambda_0)^* L`,
/// where `F(lambda_0)` is the holomorphic extension of the unitary frame
/// obtained from its band-limited Fourier series. Returns the dressed frames
/// on the nodes.
///
/// `d_L(lambda_0) = pi^L` kills `L perp` and `d_{L'}^{-1}` has its pole on
/// `L' perp`, so the product is regular at `lambda_0` iff
/// `F(lambda_0) L' perp = L perp`, i.e. `L' = F(lambda_0)^* L`. Regularity at
/// `1/conj(lambda_0)` then follows from unitarity on the circle.
pub fn dress_unitary_frame(f: &[Mat2], offset: f64, d: &SimpleFactor) -> Result<Vec<Mat2>> {
    let fl = FourierLoop::from_samples(f, offset);
    let f0 = fl.eval_band(d.lambda_0, fl.band_limit(FRAME_NOISE));
    let fa = f0.adjoint();
    let l2 = [
        fa[(0, 0)] * d.line[0] + fa[(0, 1)] * d.line[1],
        fa[(1, 0)] * d.line[0] + fa[(1, 1)] * d.line[1],
    ];
    let d2 = SimpleFactor::new(d.lambda_0, l2)?;
    let nodes = circle_nodes(f.len(), offset);
    Ok(nodes
        .iter()
        .zip(f)
        .map(|(&l, fj)| d.eval(l) * fj * d2.eval_inverse(l))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn fourier_roundtrip() {
        let n = 32;
        let nodes = circle_nodes(n, 0.5);
        let a = Mat2::new(c(1.0, 0.0), c(0.3, 0.1), c(-0.2, 0.0), c(0.5, 0.5));
        let b = Mat2::new(c(0.0, 0.2), c(0.1, 0.0), c(0.0, 0.0), c(-0.4, 0.0));
        let s: Vec<Mat2> = nodes.iter().map(|&l| a + b * l * l + b.adjoint() / l).collect();
        let f = FourierLoop::from_samples(&s, 0.5);
        assert!(linalg::dist(&f.mode(0), &a) < 1e-14);
        assert!(linalg::dist(&f.mode(2), &b) < 1e-14);
        assert!(linalg::dist(&f.mode(-1), &b.adjoint()) < 1e-14);
        let z = c(0.3, 0.9);
        assert!(linalg::dist(&f.eval(z, 0.0), &(a + b * z * z + b.adjoint() / z)) < 1e-13);
    }

    #[test]
    fn unitary_input_is_fixed() {
        let n = 64;
        let nodes = circle_nodes(n, 0.5);
        let frames: Vec<Mat2> = nodes
            .iter()
            .map(|&l| {
                let a = c(0.6, 0.0) * l;
                let b = c(0.8, 0.0);
                linalg::s3_to_su2([a / a.norm() * 0.6, b])
            })
            .collect();
        let s = LoopSample::new(frames.clone(), 0.5).unwrap();
        let r = unitarize_loop(&s, &IwasawaOptions::default()).unwrap();
        assert_eq!(r.refinements, 0);
        for (p, f) in r.positive.iter().zip(&frames) {
            assert!(linalg::dist(p, &linalg::identity()) < 1e-12);
            assert!(linalg::unitarity_error(f) < 1e-12);
        }
    }

    #[test]
    fn constant_positive_input() {
        let b = Mat2::new(c(2.0, 0.0), c(0.3, -0.7), c(0.0, 0.0), c(0.5, 0.0));
        let s = LoopSample::new(vec![b; 64], 0.5).unwrap();
        let r = unitarize_loop(&s, &IwasawaOptions::default()).unwrap();
        for f in &r.unitary {
            assert!(linalg::dist(f, &linalg::identity()) < 1e-10, "{f}");
        }
        assert!(linalg::dist(&r.b0, &b) < 1e-10);
    }

    #[test]
    fn band_limited_evaluation_ignores_noise() {
        let n = 64;
        let nodes = circle_nodes(n, 0.5);
        let a = Mat2::new(c(1.0, 0.0), c(0.3, 0.1), c(-0.2, 0.0), c(0.5, 0.5));
        let b = Mat2::new(c(0.0, 0.2), c(0.1, 0.0), c(0.0, 0.0), c(-0.4, 0.0));
        let exact = |l: Complex64| a + b * l + b.adjoint() / l;
        // smooth loop plus noise in mode 20
        let s: Vec<Mat2> = nodes.iter().map(|&l| exact(l) + a * (1e-9 * l.powi(20))).collect();
        let fl = FourierLoop::from_samples(&s, 0.5);
        let band = fl.band_limit(1e-7);
        assert_eq!(band, 2);
        let l0 = c(0.3, 0.1);
        assert!(linalg::dist(&fl.eval_band(l0, band), &exact(l0)) < 1e-12);
        assert!(linalg::dist(&fl.eval(l0, 0.0), &exact(l0)) > 1e-2);
    }

    #[test]
    fn dressing_factor_properties() {
        let d = SimpleFactor::new(c(0.5, 0.2), [c(1.0, 0.0), c(0.3, -0.4)]).unwrap();
        assert!(linalg::dist(&d.eval(c(1.0, 0.0)), &linalg::identity()) == 0.0);
        assert!(d.eval(d.lambda_0).determinant().norm() < 1e-15);
        for l in circle_nodes(64, 0.0) {
            assert!((d.scalar(l).norm() - 1.0).abs() < 1e-12);
        }
        assert!(SimpleFactor::new(c(0.6, 0.8), [c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }
}
