//! Spectral data on the double cover `t^2 = lambda`: truncated odd series
//! `x(t)` and `a(t)`, the reality and closing conditions, a Levenberg-Marquardt
//! solver and the area and mean-curvature formulas.

use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli::{self, AffineConnCoord};
use crate::unitarizer::{a_tilde, AuCache, AuSolver};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Closing representative `(x, a) = (-(1+i)/4, (-1+i)/4)`.
pub const CLOSING_CLASS: AffineConnCoord = AffineConnCoord {
    x: Complex64::new(-0.25, -0.25),
    a: Complex64::new(-0.25, 0.25),
};

/// Distance of `x1 a_{-1}` from `±1/(12 pi)` below which a guess is projected.
pub const FORBIDDEN_MARGIN: f64 = 1e-3;

/// Truncated spectral data.
///
/// `x(t) = sum_k x_coeffs[k] t^{2k+1}` with `N = x_coeffs.len()` terms, and
/// `a(t) = a_coeffs[0] / t + sum_{k>=1} a_coeffs[k] t^{2k-1}` with `N + 2`
/// terms, i.e. up to `t^{2N+1}`. With these lengths the collocation system
/// restricted to square-symmetric data is square at `n_points = 4(N+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub x_coeffs: Vec<Complex64>,
    pub a_coeffs: Vec<Complex64>,
    pub n: usize,
}

impl SpectralData {
    pub fn new(x_coeffs: Vec<Complex64>, a_coeffs: Vec<Complex64>) -> Result<Self> {
        let n = x_coeffs.len();
        if n == 0 {
            return Err(Error::Config("x(t) needs at least one coefficient".into()));
        }
        if a_coeffs.len() != n + 2 {
            return Err(Error::Config(format!(
                "a(t) needs {} coefficients for truncation {n}, got {}",
                n + 2,
                a_coeffs.len()
            )));
        }
        Ok(Self { x_coeffs, a_coeffs, n })
    }

    /// Exponent of `t` carried by `a_coeffs[k]`.
    pub fn a_power(k: usize) -> i32 {
        2 * k as i32 - 1
    }

    /// Exponent of `t` carried by `x_coeffs[k]`.
    pub fn x_power(k: usize) -> i32 {
        2 * k as i32 + 1
    }

    pub fn x_at(&self, t: Complex64) -> Complex64 {
        self.x_coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * t.powi(Self::x_power(k)))
            .sum()
    }

    pub fn a_at(&self, t: Complex64) -> Complex64 {
        self.a_coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * t.powi(Self::a_power(k)))
            .sum()
    }

    pub fn x1(&self) -> Complex64 {
        self.x_coeffs[0]
    }

    pub fn a_minus1(&self) -> Complex64 {
        self.a_coeffs[0]
    }

    /// `x1 a_{-1}`, the only combination entering the area.
    pub fn pole_product(&self) -> Complex64 {
        self.x1() * self.a_minus1()
    }

    /// Pole coefficient `c_{-1}` of the `dz` part after rescaling `t` so that
    /// the `dzbar` part reads `t dzbar`.
    pub fn pole_coefficient(&self) -> Complex64 {
        let scale = moduli::denormalize_trivialization(self.x1());
        self.a_minus1() * PI * scale
    }

    /// Distance of [`Self::pole_product`] from the forbidden values `±1/(12 pi)`.
    pub fn forbidden_distance(&self) -> f64 {
        let c = 1.0 / (12.0 * PI);
        let p = self.pole_product();
        (p - c).norm().min((p + c).norm())
    }

    /// Minimum distance of `x(t)` to `L'` over 256 samples of the disc
    /// `1/8 <= |t| <= 1`.
    pub fn branch_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for r in 1..=8 {
            for k in 0..32 {
                let t = Complex64::from_polar(r as f64 / 8.0, 2.0 * PI * k as f64 / 32.0);
                best = best.min(moduli::lattice_distance(self.x_at(t)));
            }
        }
        best
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.x_coeffs.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Degenerate("x(t) vanishes identically".into()));
        }
        if self.x1().norm() == 0.0 {
            return Err(Error::Degenerate("x1 = 0".into()));
        }
        let fd = self.forbidden_distance();
        if fd < 1e-12 {
            return Err(Error::Forbidden(format!(
                "c_-1 = {} equals ±pi/12",
                self.pole_coefficient()
            )));
        }
        let bc = self.branch_clearance();
        if bc <= 1e-3 {
            return Err(Error::Forbidden(format!(
                "x(t) comes within {bc:.2e} of the trivial bundle inside the disc"
            )));
        }
        Ok(())
    }

    /// Move `a_{-1}` so that `x1 a_{-1}` is at least [`FORBIDDEN_MARGIN`] from `±1/(12 pi)`.
    /// Returns a description of the change if one was made.
    pub fn project_off_forbidden(&mut self) -> Option<String> {
        let c = 1.0 / (12.0 * PI);
        let p = self.pole_product();
        let target = if (p - c).norm() < (p + c).norm() { c } else { -c };
        let d = p - target;
        if d.norm() >= FORBIDDEN_MARGIN {
            return None;
        }
        // push away from the forbidden value; from exactly on it, move towards larger area
        let dir = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let p_new = target + dir * FORBIDDEN_MARGIN;
        let old = self.a_coeffs[0];
        self.a_coeffs[0] = p_new / self.x1();
        Some(format!(
            "x1 a_-1 = {p} is within {FORBIDDEN_MARGIN:e} of {target:.6}; a_-1 moved from {old} to {}",
            self.a_coeffs[0]
        ))
    }

    fn param_count(&self) -> usize {
        2 * (self.x_coeffs.len() + self.a_coeffs.len())
    }

    fn to_params(&self) -> Vec<f64> {
        self.x_coeffs
            .iter()
            .chain(self.a_coeffs.iter())
            .flat_map(|c| [c.re, c.im])
            .collect()
    }

    fn with_params(&self, p: &[f64]) -> Self {
        let nx = self.x_coeffs.len();
        let cs: Vec<Complex64> = p.chunks(2).map(|w| Complex64::new(w[0], w[1])).collect();
        Self {
            x_coeffs: cs[..nx].to_vec(),
            a_coeffs: cs[nx..].to_vec(),
            n: self.n,
        }
    }

    /// Pad or cut to truncation `n`, keeping the low-order coefficients.
    pub fn with_truncation(&self, n: usize) -> Result<Self> {
        let mut x = self.x_coeffs.clone();
        let mut a = self.a_coeffs.clone();
        x.resize(n, Complex64::new(0.0, 0.0));
        a.resize(n + 2, Complex64::new(0.0, 0.0));
        Self::new(x, a)
    }
}

/// Sym points `lambda_1, lambda_2` on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymConfig {
    pub lambda_1: Complex64,
    pub lambda_2: Complex64,
}

impl SymConfig {
    pub fn new(lambda_1: Complex64, lambda_2: Complex64) -> Result<Self> {
        for l in [lambda_1, lambda_2] {
            if (l.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("Sym point {l} is not unimodular")));
            }
        }
        if (lambda_1 - lambda_2).norm() < 1e-12 {
            return Err(Error::Config("Sym points coincide".into()));
        }
        Ok(Self { lambda_1, lambda_2 })
    }

    /// `lambda = 1, -1`: the minimal case.
    pub fn minimal() -> Self {
        Self {
            lambda_1: Complex64::new(1.0, 0.0),
            lambda_2: Complex64::new(-1.0, 0.0),
        }
    }
}

/// `H = i (lambda_1 + lambda_2) / (lambda_1 - lambda_2)`.
pub fn mean_curvature(s: &SymConfig) -> Result<Complex64> {
    let d = s.lambda_1 - s.lambda_2;
    if d.norm() < 1e-12 {
        return Err(Error::Degenerate("Sym points coincide".into()));
    }
    Ok(I * (s.lambda_1 + s.lambda_2) / d)
}

/// Area as a complex number: `-12 pi (1/6 - 2 pi x1 a_{-1})`. The imaginary
/// part vanishes for admissible data and serves as a diagnostic.
pub fn area_complex(d: &SpectralData) -> Complex64 {
    -12.0 * PI * (1.0 / 6.0 - 2.0 * PI * d.pole_product())
}

pub fn area(d: &SpectralData) -> f64 {
    area_complex(d).re
}

/// Collocation nodes `exp(2 pi i j / n)` for `j < n/2`; the others follow by oddness.
pub fn half_circle_nodes(n_points: usize) -> Vec<Complex64> {
    (0..n_points / 2)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_points as f64))
        .collect()
}

/// Distance of `(x(t), a(t))` at `t = 1` and `t = i` from the closing class,
/// as `[Re dx, Im dx, Re da, Im da]` per point against the nearest coupled
/// lattice translate (chosen by `x`).
pub fn closing_residual(d: &SpectralData) -> Vec<f64> {
    let mut out = Vec::with_capacity(8);
    for t in [Complex64::new(1.0, 0.0), I] {
        let p = AffineConnCoord::new(d.x_at(t), d.a_at(t));
        let q = nearest_closing_translate(p.x);
        let dx = p.x - q.x;
        let da = p.a - q.a;
        out.extend([dx.re, dx.im, da.re, da.im]);
    }
    out
}

fn nearest_closing_translate(x: Complex64) -> AffineConnCoord {
    let dx = x - CLOSING_CLASS.x;
    CLOSING_CLASS.translate((2.0 * dx.re).round() as i64, (2.0 * dx.im).round() as i64)
}

/// One sample of the circle data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CircleSample {
    pub t: Complex64,
    pub x: Complex64,
    pub a: Complex64,
    pub a_u: Complex64,
}

/// Options of the spectral solve.
#[derive(Debug, Clone)]
pub struct SpectralOptions {
    pub n_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Ratio of singular values below which the Jacobian counts as rank deficient.
    pub rank_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            n_points: 16,
            tol: 1e-8,
            max_iter: 30,
            rank_tol: 1e-12,
        }
    }
}

/// Diagnostics of a spectral solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Number of residual evaluations followed by a convergence test.
    pub iterations: usize,
    /// Max-norm of the stacked residual after each iteration.
    pub residual_history: Vec<f64>,
    pub reality_residual: f64,
    pub closing_residual: f64,
    pub singular_values: Vec<f64>,
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Data and report of a solve, converged or not.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub data: SpectralData,
    pub report: SolveReport,
}

/// Evaluates residuals and runs the Levenberg-Marquardt iteration.
#[derive(Debug, Default)]
pub struct SpectralSolver {
    pub au: AuSolver,
    cache: Mutex<AuCache>,
}

impl SpectralSolver {
    pub fn new(au: AuSolver) -> Self {
        Self {
            au,
            cache: Mutex::new(AuCache::new()),
        }
    }

    /// `a^u(x)` through the cache keyed by reduced `x`.
    pub fn a_u(&self, x: Complex64) -> Result<Complex64> {
        if let Some(v) = self.cache.lock().expect("cache poisoned").lookup(x) {
            return Ok(v);
        }
        let r = moduli::reduce(x).x();
        let s = self.au.solve_au(r, a_tilde(&self.au.theta, r)?)?;
        let mut c = self.cache.lock().expect("cache poisoned");
        c.insert(s);
        Ok(c.lookup(x).expect("just inserted"))
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    fn node_values(&self, d: &SpectralData, nodes: &[Complex64]) -> Result<Vec<Complex64>> {
        nodes
            .par_iter()
            .enumerate()
            .map(|(j, &t)| {
                self.a_u(d.x_at(t)).map_err(|e| Error::AtNode {
                    index: j,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// `[Re, Im]` of `a(t_j) - a^u(x(t_j))` on the independent half of the nodes.
    pub fn reality_residual(&self, d: &SpectralData, n_points: usize) -> Result<Vec<f64>> {
        check_points(n_points)?;
        let nodes = half_circle_nodes(n_points);
        let au = self.node_values(d, &nodes)?;
        Ok(nodes
            .iter()
            .zip(au)
            .flat_map(|(&t, v)| {
                let r = d.a_at(t) - v;
                [r.re, r.im]
            })
            .collect())
    }

    /// Circle samples `(t, x(t), a(t), a^u(x(t)))` at `n` equispaced points.
    pub fn circle_samples(&self, d: &SpectralData, n: usize) -> Result<Vec<CircleSample>> {
        let ts: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        let au = self.node_values(d, &ts)?;
        Ok(ts
            .iter()
            .zip(au)
            .map(|(&t, a_u)| CircleSample {
                t,
                x: d.x_at(t),
                a: d.a_at(t),
                a_u,
            })
            .collect())
    }

    /// Given `x(t)`, choose `a(t)` as the least-squares fit of `a^u(x(t))` at
    /// the collocation nodes. Returns the data and the fit residual (max-norm).
    pub fn fit_a(&self, x_coeffs: Vec<Complex64>, n_points: usize) -> Result<(SpectralData, f64)> {
        check_points(n_points)?;
        let n = x_coeffs.len();
        let mut d = SpectralData::new(x_coeffs, vec![Complex64::new(0.0, 0.0); n + 2])?;
        let nodes = half_circle_nodes(n_points);
        let vals = self.node_values(&d, &nodes)?;
        let m = DMatrix::from_fn(nodes.len(), n + 2, |j, k| nodes[j].powi(SpectralData::a_power(k)));
        let rhs = DVector::from_vec(vals.clone());
        let sol = m
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Degenerate(format!("least-squares fit failed: {e}")))?;
        d.a_coeffs = sol.iter().copied().collect();
        let res = (m * sol - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok((d, res))
    }

    /// Initial data `x(t) = x1 t` with `a` fitted to `a^u(x(t))`.
    pub fn initial_guess(&self, n: usize, x1: Complex64, n_points: usize) -> Result<SpectralData> {
        let mut x = vec![Complex64::new(0.0, 0.0); n.max(1)];
        x[0] = x1;
        Ok(self.fit_a(x, n_points)?.0)
    }

    fn stacked(&self, d: &SpectralData, n_points: usize) -> Result<Vec<f64>> {
        let mut r = self.reality_residual(d, n_points)?;
        r.extend(closing_residual(d));
        Ok(r)
    }

    /// Real Jacobian of the stacked residual, by implicit differentiation of `a^u`.
    fn jacobian(&self, d: &SpectralData, n_points: usize) -> Result<DMatrix<f64>> {
        let nodes = half_circle_nodes(n_points);
        let nx = d.x_coeffs.len();
        let na = d.a_coeffs.len();
        let rows = 2 * nodes.len() + 8;
        let derivs: Vec<[[f64; 2]; 2]> = nodes
            .par_iter()
            .enumerate()
            .map(|(j, &t)| {
                let x = d.x_at(t);
                let a = self.a_u(x)?;
                self.au.derivative_at(x, a).map_err(|e| Error::AtNode {
                    index: j,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let mut jac = DMatrix::<f64>::zeros(rows, 2 * (nx + na));
        for (j, (&t, dd)) in nodes.iter().zip(&derivs).enumerate() {
            for k in 0..nx {
                let tq = t.powi(SpectralData::x_power(k));
                for (c, dx) in [tq, I * tq].into_iter().enumerate() {
                    // d(a - a^u) = -D dx
                    jac[(2 * j, 2 * k + c)] = -(dd[0][0] * dx.re + dd[0][1] * dx.im);
                    jac[(2 * j + 1, 2 * k + c)] = -(dd[1][0] * dx.re + dd[1][1] * dx.im);
                }
            }
            for k in 0..na {
                let tp = t.powi(SpectralData::a_power(k));
                for (c, da) in [tp, I * tp].into_iter().enumerate() {
                    jac[(2 * j, 2 * (nx + k) + c)] = da.re;
                    jac[(2 * j + 1, 2 * (nx + k) + c)] = da.im;
                }
            }
        }
        let base = 2 * nodes.len();
        for (q, t) in [Complex64::new(1.0, 0.0), I].into_iter().enumerate() {
            let r0 = base + 4 * q;
            for k in 0..nx {
                let tq = t.powi(SpectralData::x_power(k));
                for (c, dx) in [tq, I * tq].into_iter().enumerate() {
                    jac[(r0, 2 * k + c)] = dx.re;
                    jac[(r0 + 1, 2 * k + c)] = dx.im;
                }
            }
            for k in 0..na {
                let tp = t.powi(SpectralData::a_power(k));
                for (c, da) in [tp, I * tp].into_iter().enumerate() {
                    jac[(r0 + 2, 2 * (nx + k) + c)] = da.re;
                    jac[(r0 + 3, 2 * (nx + k) + c)] = da.im;
                }
            }
        }
        Ok(jac)
    }

    /// Levenberg-Marquardt on the stacked reality and closing residuals.
    ///
    /// Always returns the last iterate with its report; use
    /// [`Self::solve_spectral`] for an error on non-convergence.
    pub fn solve(&self, guess: &SpectralData, opts: &SpectralOptions) -> Result<SolveOutcome> {
        check_points(opts.n_points)?;
        let mut report = SolveReport::default();
        let mut d = guess.clone();
        if d.x_coeffs.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Degenerate("x(t) vanishes identically".into()));
        }
        if let Some(w) = d.project_off_forbidden() {
            report.warnings.push(w);
        }
        d.validate()?;
        let n_eq = opts.n_points + 8;
        if n_eq < d.param_count() {
            report.warnings.push(format!(
                "{} real equations for {} real unknowns; the solution is not isolated",
                n_eq,
                d.param_count()
            ));
        }
        let mut r = self.stacked(&d, opts.n_points)?;
        let mut mu = 1e-6;
        for it in 1..=opts.max_iter {
            let res = max_norm(&r);
            report.iterations = it;
            report.residual_history.push(res);
            if res < opts.tol {
                report.converged = true;
                break;
            }
            let jac = self.jacobian(&d, opts.n_points)?;
            let sv = jac.clone().svd(false, false).singular_values;
            let smax = sv.max();
            let smin = sv.min();
            report.singular_values = sv.iter().copied().collect();
            report.condition = smax / smin;
            if !(smin > opts.rank_tol * smax) {
                return Err(Error::Degenerate(format!(
                    "rank-deficient Jacobian, singular values {:?}",
                    report.singular_values
                )));
            }
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * DVector::from_vec(r.clone());
            let p0 = DVector::from_vec(d.to_params());
            let mut accepted = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
                }
                let step = match a.cholesky() {
                    Some(ch) => ch.solve(&(-&g)),
                    None => {
                        mu *= 10.0;
                        continue;
                    }
                };
                let trial = d.with_params((&p0 + &step).as_slice());
                let ok = trial.validate().and_then(|_| self.stacked(&trial, opts.n_points));
                match ok {
                    Ok(rt) if norm2(&rt) < norm2(&r) => {
                        d = trial;
                        r = rt;
                        mu = (mu / 10.0).max(1e-12);
                        accepted = true;
                        break;
                    }
                    // a failed a^u solve or a forbidden trial point counts as a bad step
                    Ok(_) | Err(Error::AtNode { .. }) | Err(Error::Forbidden(_)) => mu *= 10.0,
                    Err(e) => return Err(e),
                }
            }
            if !accepted {
                break;
            }
        }
        if !report.converged {
            report.residual_history.push(max_norm(&r));
        }
        let nr = 2 * (opts.n_points / 2);
        report.reality_residual = max_norm(&r[..nr]);
        report.closing_residual = max_norm(&r[nr..]);
        Ok(SolveOutcome { data: d, report })
    }

    /// Like [`Self::solve`] but non-convergence is an error.
    pub fn solve_spectral(&self, guess: &SpectralData, opts: &SpectralOptions) -> Result<SolveOutcome> {
        let out = self.solve(guess, opts)?;
        if !out.report.converged {
            return Err(Error::NonConvergence {
                what: "spectral Levenberg-Marquardt",
                iterations: out.report.iterations,
                residual: *out.report.residual_history.last().unwrap_or(&f64::NAN),
            });
        }
        Ok(out)
    }
}

fn check_points(n_points: usize) -> Result<()> {
    if n_points < 4 || !n_points.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "n_points must be a positive multiple of 4, got {n_points}"
        )));
    }
    Ok(())
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn series_are_odd() {
        let d = SpectralData::new(vec![c(0.3, 0.1), c(0.01, 0.0)], vec![c(0.2, -0.2), c(0.0, 0.1), c(0.05, 0.0), c(0.0, 0.0)])
            .unwrap();
        let t = c(0.4, 0.7);
        assert!((d.x_at(-t) + d.x_at(t)).norm() < 1e-15);
        assert!((d.a_at(-t) + d.a_at(t)).norm() < 1e-15);
    }

    #[test]
    fn area_formula_values() {
        let mut d = SpectralData::new(vec![c(1.0, 0.0)], vec![c(0.0, 0.0); 3]).unwrap();
        d.a_coeffs[0] = c(1.0 / (12.0 * PI), 0.0);
        assert!(area(&d).abs() < 1e-14);
        d.a_coeffs[0] = c(1.0 / (6.0 * PI), 0.0);
        assert!((area(&d) - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn mean_curvature_values() {
        let h = mean_curvature(&SymConfig::minimal()).unwrap();
        assert!(h.norm() < 1e-15);
        let th = PI / 3.0;
        let s = SymConfig::new(Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, -th)).unwrap();
        let h = mean_curvature(&s).unwrap();
        assert!((h.re - 1.0 / 3f64.sqrt()).abs() < 1e-15 && h.im.abs() < 1e-15);
        let r = SymConfig::new(s.lambda_2, s.lambda_1).unwrap();
        assert!((mean_curvature(&r).unwrap() + h).norm() < 1e-15);
        assert!(SymConfig::new(c(1.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn closing_translates() {
        let d = SpectralData::new(
            vec![c(-0.25 + 0.5, -0.25)],
            vec![c(-0.25 + 0.5, 0.25), c(0.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let r = closing_residual(&d);
        assert!(r[..4].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn forbidden_projection() {
        let x1 = c(0.25, 0.25);
        let a = c(1.0 / (12.0 * PI), 0.0) / x1;
        let mut d = SpectralData::new(vec![x1], vec![a, c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(d.validate().is_err());
        assert!(d.project_off_forbidden().is_some());
        assert!(d.forbidden_distance() >= FORBIDDEN_MARGIN * (1.0 - 1e-12));
        assert!(d.validate().is_ok());
    }
}
