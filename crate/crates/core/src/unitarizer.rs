//! The unitarizing coefficient `a^u(x)`: the value of `a` for which the rank-2
//! connection built from `(x, a)` has SU(2)-realizable monodromy.
//!
//! The traces of the period monodromies are holomorphic in `(x, a)`. Newton's
//! method drives `(Im tr M_A, Im tr M_B)` to zero in the two real unknowns
//! `(Re a, Im a)`; the complex derivative is taken by a central difference in
//! `a`, which by the Cauchy-Riemann equations yields the whole real Jacobian.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::moduli::{self, AffineConnCoord};
use crate::monodromy::{self, TraceTriple};
use crate::theta::{self, ThetaFn, DEFAULT_POLE_RADIUS};

/// Settings of the Newton solver.
#[derive(Debug, Clone)]
pub struct AuSolver {
    pub theta: ThetaFn,
    /// Target for `max |Im tr|`.
    pub tol: f64,
    /// Tolerance of the transport integrator.
    pub transport_tol: f64,
    /// Central-difference step in `a`.
    pub fd_step: f64,
    pub max_iter: usize,
    /// Slack for the SU(2) admissibility check.
    pub su2_tol: f64,
}

impl Default for AuSolver {
    fn default() -> Self {
        Self {
            theta: ThetaFn::default(),
            tol: 1e-10,
            transport_tol: 1e-12,
            fd_step: 1e-6,
            max_iter: 40,
            su2_tol: 1e-7,
        }
    }
}

/// A converged value of the unitarizing coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuSample {
    /// The (unreduced) point at which `a^u` was computed.
    pub x: Complex64,
    pub a_u: Complex64,
    pub defect_norm: f64,
    pub su2_ok: bool,
    pub iterations: usize,
    pub traces: TraceTriple,
}

/// `a^u = a_tilde + b` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeDecomposition {
    pub a_tilde: Complex64,
    pub b: Complex64,
}

/// Explicit odd predictor
/// `-(1/12 pi) theta'/theta(-2x) + (1/12 pi) theta'/theta(2x) + x/3 + 2 conj(x)/3`.
pub fn a_tilde(th: &ThetaFn, x: Complex64) -> Result<Complex64> {
    let w = 2.0 * x;
    if theta::lattice_distance(w) < DEFAULT_POLE_RADIUS {
        return Err(Error::Pole {
            at: x,
            radius: DEFAULT_POLE_RADIUS / 2.0,
        });
    }
    let k = 1.0 / (12.0 * PI);
    Ok(-k * th.log_derivative(-w) + k * th.log_derivative(w) + x / 3.0 + 2.0 * x.conj() / 3.0)
}

struct Eval {
    /// `tr M_A`, `tr M_B`, `tr M_A M_B`.
    g: [Complex64; 3],
    m_a: Mat2,
    m_b: Mat2,
}

impl Eval {
    fn defect(&self) -> f64 {
        self.g.iter().map(|g| g.im.abs()).fold(0.0, f64::max)
    }
}

impl AuSolver {
    fn eval(&self, x: Complex64, a: Complex64) -> Result<Eval> {
        let (m_a, m_b) =
            monodromy::period_monodromy(&self.theta, AffineConnCoord::new(x, a), self.transport_tol)?;
        Ok(Eval {
            g: [m_a.trace(), m_b.trace(), (m_a * m_b).trace()],
            m_a,
            m_b,
        })
    }

    /// Complex derivatives of the three traces in `a` (or in `x` when `in_x`).
    fn trace_derivatives(&self, x: Complex64, a: Complex64, in_x: bool) -> Result<[Complex64; 3]> {
        let h = self.fd_step;
        let (p, m) = if in_x {
            (self.eval(x + h, a)?, self.eval(x - h, a)?)
        } else {
            (self.eval(x, a + h)?, self.eval(x, a - h)?)
        };
        Ok([0, 1, 2].map(|k| (p.g[k] - m.g[k]) / (2.0 * h)))
    }

    /// Gauss-Newton iteration from `a_guess`; reports SU(2) admissibility without rejecting.
    ///
    /// The unknown is `a` (two real parameters); the equations are the
    /// imaginary parts of `tr M_A`, `tr M_B` and `tr M_A M_B`. The third trace
    /// is needed on symmetry lines such as the real axis, where the first two
    /// are real for a whole real curve of `a`.
    pub fn newton(&self, x: Complex64, a_guess: Complex64) -> Result<AuSample> {
        if moduli::is_trivial_bundle(x, DEFAULT_POLE_RADIUS / 2.0) {
            return Err(Error::Degenerate(format!(
                "x = {x} is congruent to 0 modulo the half lattice"
            )));
        }
        let mut a = a_guess;
        let mut cur = self.eval(x, a)?;
        let mut res = cur.defect();
        for it in 0..=self.max_iter {
            if res < self.tol {
                let traces = TraceTriple::of(&cur.m_a, &cur.m_b);
                return Ok(AuSample {
                    x,
                    a_u: a,
                    defect_norm: res,
                    su2_ok: traces.su2_realizable(self.su2_tol),
                    iterations: it,
                    traces,
                });
            }
            if it == self.max_iter {
                break;
            }
            let d = self.trace_derivatives(x, a, false)?;
            let r = cur.g.map(|g| g.im);
            let step = gauss_newton_step(&d, &r).ok_or(Error::NonConvergence {
                what: "a^u Gauss-Newton (singular Jacobian)",
                iterations: it,
                residual: res,
            })?;
            // backtracking on the max-norm of the defect
            let mut lambda = 1.0;
            loop {
                let trial = a + step * lambda;
                let ev = self.eval(x, trial)?;
                let r = ev.defect();
                if r < res || lambda < 1.0 / 64.0 {
                    a = trial;
                    cur = ev;
                    res = r;
                    break;
                }
                lambda *= 0.5;
            }
        }
        Err(Error::NonConvergence {
            what: "a^u Gauss-Newton",
            iterations: self.max_iter,
            residual: res,
        })
    }

    /// Converged `a^u(x)`; a root that is not SU(2)-realizable is an error.
    ///
    /// Within [`BRANCH_LINEARIZATION_RADIUS`] of a 2-torsion point the trace
    /// defect is quadratic in the distance and Newton loses accuracy; there the
    /// exact branch value plus an odd central-difference linearization is used.
    pub fn solve_au(&self, x: Complex64, a_guess: Complex64) -> Result<AuSample> {
        let s = match nearest_branch_point(x) {
            Some((b, ab)) if (x - b).norm() < BRANCH_LINEARIZATION_RADIUS => self.near_branch(x, b, ab)?,
            _ => self.newton(x, a_guess)?,
        };
        if !s.su2_ok {
            return Err(Error::Rejected(format!(
                "trace-real root a = {} at x = {} is not SU(2)-realizable (traces {:?}, fricke {:.3e})",
                s.a_u,
                x,
                s.traces,
                s.traces.fricke()
            )));
        }
        Ok(s)
    }

    fn near_branch(&self, x: Complex64, b: Complex64, ab: Complex64) -> Result<AuSample> {
        let delta = x - b;
        let a_u = if delta.norm() == 0.0 {
            ab
        } else {
            let slope = self.branch_slopes(b, ab)?;
            ab + slope[0] * delta.re + slope[1] * delta.im
        };
        let ev = self.eval(x, a_u)?;
        let traces = TraceTriple::of(&ev.m_a, &ev.m_b);
        Ok(AuSample {
            x,
            a_u,
            defect_norm: ev.defect(),
            su2_ok: traces.su2_realizable(self.su2_tol),
            iterations: 0,
            traces,
        })
    }

    /// `a^u(x)` started from the explicit predictor.
    pub fn solve_default(&self, x: Complex64) -> Result<AuSample> {
        let guess = a_tilde(&self.theta, x)?;
        self.solve_au(x, guess)
    }

    /// Real Jacobian `d(Re a^u, Im a^u) / d(Re x, Im x)` by implicit differentiation.
    ///
    /// Returned row-major as `[[dRe a/dRe x, dRe a/dIm x], [dIm a/dRe x, dIm a/dIm x]]`.
    pub fn derivative(&self, x: Complex64, a_u: Complex64) -> Result<[[f64; 2]; 2]> {
        let ga = self.trace_derivatives(x, a_u, false)?;
        let gx = self.trace_derivatives(x, a_u, true)?;
        // least-squares solution of J_a da = -J_x dx for each column of J_x
        let mut out = [[0.0; 2]; 2];
        #[allow(clippy::needless_range_loop)]
        for j in 0..2 {
            let col = gx.map(|g| if j == 0 { g.im } else { g.re });
            let d = gauss_newton_step(&ga, &col)
                .ok_or_else(|| Error::Degenerate("singular a-Jacobian".into()))?;
            out[0][j] = d.re;
            out[1][j] = d.im;
        }
        Ok(out)
    }

    /// Like [`Self::derivative`], but within [`BRANCH_DERIVATIVE_RADIUS`] of a
    /// 2-torsion point, where the trace derivatives degenerate, the slope of
    /// the branch linearization is returned instead.
    pub fn derivative_at(&self, x: Complex64, a_u: Complex64) -> Result<[[f64; 2]; 2]> {
        match nearest_branch_point(x) {
            Some((b, ab)) if (x - b).norm() < BRANCH_DERIVATIVE_RADIUS => {
                let s = self.branch_slopes(b, ab)?;
                Ok([[s[0].re, s[1].re], [s[0].im, s[1].im]])
            }
            _ => self.derivative(x, a_u),
        }
    }

    /// `(d a^u / d Re x, d a^u / d Im x)` at the 2-torsion point `b`.
    fn branch_slopes(&self, b: Complex64, ab: Complex64) -> Result<[Complex64; 2]> {
        // a^u(b + d) - a^u(b) is odd in d, so one-sided differences are second-order accurate
        let h = BRANCH_DIFFERENCE_STEP;
        let mut slope = [Complex64::new(0.0, 0.0); 2];
        for (k, u) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
            let xp = b + u * h;
            let ap = self.solve_au(xp, a_tilde(&self.theta, xp)?)?.a_u;
            slope[k] = (ap - ab) / h;
        }
        Ok(slope)
    }

    /// `b = a^u - a_tilde` at `x`.
    pub fn extract_b(&self, x: Complex64) -> Result<TildeDecomposition> {
        let at = a_tilde(&self.theta, x)?;
        let s = self.solve_au(x, at)?;
        Ok(TildeDecomposition {
            a_tilde: at,
            b: s.a_u - at,
        })
    }
}

/// Radius around 2-torsion points inside which `a^u` is linearized.
pub const BRANCH_LINEARIZATION_RADIUS: f64 = 1e-4;
const BRANCH_DIFFERENCE_STEP: f64 = 1e-3;
/// Radius inside which [`AuSolver::derivative_at`] uses the branch slope.
pub const BRANCH_DERIVATIVE_RADIUS: f64 = 1e-2;

/// Nearest 2-torsion point `b` (excluding `L'` itself) and the exact value
/// `a^u(b) = (m - i n)/4` where `2b = (m + i n)/2`, forced by oddness and the
/// functional equations.
pub fn nearest_branch_point(x: Complex64) -> Option<(Complex64, Complex64)> {
    let m = (4.0 * x.re).round();
    let n = (4.0 * x.im).round();
    if (m as i64).rem_euclid(2) == 0 && (n as i64).rem_euclid(2) == 0 {
        return None;
    }
    Some((Complex64::new(m, n) / 4.0, Complex64::new(m, -n) / 4.0))
}

/// Least-squares step `-(J^T J)^{-1} J^T r` where row `k` of `J` is the
/// derivative of `Im g_k` with respect to `(Re w, Im w)`, i.e. `(Im g_k', Re g_k')`
/// for holomorphic `g_k`.
fn gauss_newton_step(d: &[Complex64; 3], r: &[f64; 3]) -> Option<Complex64> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (g, &rk) in d.iter().zip(r) {
        let (j1, j2) = (g.im, g.re);
        a11 += j1 * j1;
        a12 += j1 * j2;
        a22 += j2 * j2;
        b1 += j1 * rk;
        b2 += j2 * rk;
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-14 * (a11 * a22).max(1e-300)) {
        return None;
    }
    Some(Complex64::new(-(a22 * b1 - a12 * b2) / det, -(a11 * b2 - a12 * b1) / det))
}

/// Memo of `a^u` on reduced coordinates.
///
/// Values at unreduced points are obtained from the reduced representative
/// through `a^u(x + m/2 + n i/2) = a^u(x) + m/2 - n i/2`.
#[derive(Debug, Default)]
pub struct AuCache {
    map: HashMap<(u64, u64), AuSample>,
}

impl AuCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn split(x: Complex64) -> (Complex64, Complex64) {
        let r = moduli::reduce(x).x();
        let m = (2.0 * (x.re - r.re)).round() * 0.5;
        let n = (2.0 * (x.im - r.im)).round() * 0.5;
        (r, Complex64::new(m, -n))
    }

    /// Cached `a^u(x)`, if the reduced point has been solved.
    pub fn lookup(&self, x: Complex64) -> Option<Complex64> {
        let (r, shift) = Self::split(x);
        self.map
            .get(&(r.re.to_bits(), r.im.to_bits()))
            .map(|s| s.a_u + shift)
    }

    /// Store a sample; it is filed under its reduced point.
    pub fn insert(&mut self, s: AuSample) {
        let (r, shift) = Self::split(s.x);
        let stored = AuSample {
            x: r,
            a_u: s.a_u - shift,
            ..s
        };
        self.map.insert((r.re.to_bits(), r.im.to_bits()), stored);
    }

    /// `a^u(x)`, solving at the reduced point on a miss.
    pub fn get_or_solve(&mut self, solver: &AuSolver, x: Complex64) -> Result<Complex64> {
        let (r, shift) = Self::split(x);
        let key = (r.re.to_bits(), r.im.to_bits());
        if let Some(s) = self.map.get(&key) {
            return Ok(s.a_u + shift);
        }
        let s = solver.solve_default(r)?;
        self.map.insert(key, s);
        Ok(s.a_u + shift)
    }
}

/// One row of the `a^u` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuRow {
    pub re_x: f64,
    pub im_x: f64,
    pub re_au: f64,
    pub im_au: f64,
    pub defect: f64,
    pub su2_ok: bool,
    /// Max residual of oddness and both functional equations at this point.
    pub fe_residual: f64,
    pub status: String,
}

/// Cell-centred `n x n` grid of the fundamental cell `[0,1/2) x [0,1/2) i`.
pub fn cell_grid(n: usize) -> Vec<Complex64> {
    let h = 0.5 / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(Complex64::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
        }
    }
    out
}

/// Residual of oddness and of both functional equations at `x`, from independent solves.
pub fn functional_equation_residual(solver: &AuSolver, x: Complex64, a: Complex64) -> Result<f64> {
    let neg = solver.solve_default(-x)?.a_u;
    let re = solver.solve_default(x + 0.5)?.a_u;
    let im = solver.solve_default(x + Complex64::new(0.0, 0.5))?.a_u;
    let r1 = (neg + a).norm();
    let r2 = (re - a - 0.5).norm();
    let r3 = (im - a + Complex64::new(0.0, 0.5)).norm();
    Ok(r1.max(r2).max(r3))
}

/// Solve on every grid point in parallel; failures are recorded in the status column.
pub fn au_table(solver: &AuSolver, points: &[Complex64], check_equations: bool) -> Vec<AuRow> {
    points
        .par_iter()
        .map(|&x| {
            let guess = match a_tilde(&solver.theta, x) {
                Ok(g) => g,
                Err(e) => return failed_row(x, &e),
            };
            match solver.newton(x, guess) {
                Ok(s) => {
                    let (fe, status) = if check_equations {
                        match functional_equation_residual(solver, x, s.a_u) {
                            Ok(v) => (v, if s.su2_ok { "ok" } else { "not-su2" }.to_string()),
                            Err(e) => (f64::NAN, format!("fe-failed: {e}")),
                        }
                    } else {
                        (f64::NAN, if s.su2_ok { "ok" } else { "not-su2" }.to_string())
                    };
                    AuRow {
                        re_x: x.re,
                        im_x: x.im,
                        re_au: s.a_u.re,
                        im_au: s.a_u.im,
                        defect: s.defect_norm,
                        su2_ok: s.su2_ok,
                        fe_residual: fe,
                        status,
                    }
                }
                Err(e) => failed_row(x, &e),
            }
        })
        .collect()
}

fn failed_row(x: Complex64, e: &Error) -> AuRow {
    AuRow {
        re_x: x.re,
        im_x: x.im,
        re_au: f64::NAN,
        im_au: f64::NAN,
        defect: f64::NAN,
        su2_ok: false,
        fe_residual: f64::NAN,
        status: format!("failed: {e}"),
    }
}

/// Write rows as RFC-4180 CSV, preceded by `#` comment lines.
pub fn write_table<W: Write>(out: W, rows: &[AuRow], comments: &[String]) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Re x", "Im x", "Re a^u", "Im a^u", "defect", "su2_ok", "fe_residual", "status"])?;
    for r in rows {
        w.write_record([
            format!("{:.15e}", r.re_x),
            format!("{:.15e}", r.im_x),
            format!("{:.15e}", r.re_au),
            format!("{:.15e}", r.im_au),
            format!("{:.3e}", r.defect),
            r.su2_ok.to_string(),
            format!("{:.3e}", r.fe_residual),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn a_tilde_functional_equations() {
        let th = ThetaFn::default();
        let x = c(0.2, 0.1);
        let a = a_tilde(&th, x).unwrap();
        assert!((a_tilde(&th, -x).unwrap() + a).norm() < 1e-12);
        assert!((a_tilde(&th, x + 0.5).unwrap() - a - 0.5).norm() < 1e-12);
        assert!((a_tilde(&th, x + c(0.0, 0.5)).unwrap() - a + c(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn newton_converges_and_is_odd() {
        let s = AuSolver::default();
        let x = c(0.13, 0.07);
        let a = s.solve_default(x).unwrap();
        assert!(a.su2_ok);
        let b = s.solve_default(-x).unwrap();
        assert!((a.a_u + b.a_u).norm() < 1e-7);
    }

    #[test]
    fn branch_point_values() {
        let s = AuSolver::default();
        let b = c(0.25, 0.25);
        let at = s.solve_au(b, c(0.0, 0.0)).unwrap();
        assert_eq!(at.a_u, c(0.25, -0.25));
        // linearized and Newton values agree across the switching radius
        let d = c(0.6, 0.8) * 1.5e-4;
        let newton = s.solve_default(b + d).unwrap().a_u;
        let lin = s.solve_default(b + d * 0.5).unwrap().a_u;
        let slope_n = (newton - at.a_u) / 1.5e-4;
        let slope_l = (lin - at.a_u) / 0.75e-4;
        assert!((slope_n - slope_l).norm() < 1e-4, "{slope_n} {slope_l}");
        assert!(nearest_branch_point(c(0.01, 0.02)).is_none());
    }

    #[test]
    fn cache_applies_lattice_shift() {
        let s = AuSolver::default();
        let mut cache = AuCache::new();
        let x = c(0.13, 0.07);
        let direct = s.solve_default(x + c(0.5, 0.5)).unwrap().a_u;
        let cached = cache.get_or_solve(&s, x + c(0.5, 0.5)).unwrap();
        assert!((direct - cached).norm() < 1e-8);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn derivative_matches_resolve() {
        let s = AuSolver::default();
        let x = c(0.17, 0.11);
        let a0 = s.solve_default(x).unwrap().a_u;
        let d = s.derivative(x, a0).unwrap();
        let h = 1e-5;
        let ap = s.solve_au(x + h, a0).unwrap().a_u;
        let am = s.solve_au(x - h, a0).unwrap().a_u;
        let fd = (ap - am) / (2.0 * h);
        assert!((fd.re - d[0][0]).abs() < 1e-5, "{fd} {d:?}");
        assert!((fd.im - d[1][0]).abs() < 1e-5, "{fd} {d:?}");
    }
}
