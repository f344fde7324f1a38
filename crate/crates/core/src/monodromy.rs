//! Parallel transport along paths of the punctured torus `C/(2Z+2iZ)` and the
//! monodromy representation of the rank-2 connection.
//!
//! Transport solves `dY/ds = -(A_dz z'(s) + A_dzbar conj(z'(s))) Y` with
//! `Y(0) = Id`, so transport along `p` followed by `q` is `Y_q Y_p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::connection::{build_form_with, MatrixOneForm};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat2};
use crate::moduli::AffineConnCoord;
use crate::ode;
use crate::theta::ThetaFn;

/// Default minimum distance between a transport path and the poles.
pub const DEFAULT_MIN_CLEARANCE: f64 = 0.25;

/// Radius of the circles around the punctures.
pub const PUNCTURE_RADIUS: f64 = 0.25;

/// Base point of all loops.
pub const BASEPOINT: Complex64 = Complex64::new(0.5, 0.5);

/// Meeting point of the puncture lassos, the centre of the period square.
pub const HUB: Complex64 = Complex64::new(1.5, 1.5);

/// One piece of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathPiece {
    Segment { from: Complex64, to: Complex64 },
    /// Arc `center + radius e^{i theta}` for theta from `start` to `end`.
    Arc {
        center: Complex64,
        radius: f64,
        start: f64,
        end: f64,
    },
}

impl PathPiece {
    fn point(&self, s: f64) -> Complex64 {
        match *self {
            PathPiece::Segment { from, to } => from + (to - from) * s,
            PathPiece::Arc {
                center,
                radius,
                start,
                end,
            } => center + radius * Complex64::from_polar(1.0, start + (end - start) * s),
        }
    }

    fn velocity(&self, s: f64) -> Complex64 {
        match *self {
            PathPiece::Segment { from, to } => to - from,
            PathPiece::Arc {
                radius, start, end, ..
            } => {
                let th = start + (end - start) * s;
                Complex64::new(0.0, 1.0) * radius * (end - start) * Complex64::from_polar(1.0, th)
            }
        }
    }

    fn end_point(&self) -> Complex64 {
        self.point(1.0)
    }

    fn reversed(&self) -> Self {
        match *self {
            PathPiece::Segment { from, to } => PathPiece::Segment { from: to, to: from },
            PathPiece::Arc {
                center,
                radius,
                start,
                end,
            } => PathPiece::Arc {
                center,
                radius,
                start: end,
                end: start,
            },
        }
    }

    /// Distance from the piece to a point, treating the point as fixed in C.
    fn distance_to(&self, p: Complex64) -> f64 {
        match *self {
            PathPiece::Segment { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((p - from) * d.conj()).re / len2).clamp(0.0, 1.0)
                };
                (from + d * t - p).norm()
            }
            PathPiece::Arc {
                center,
                radius,
                start,
                end,
            } => {
                let v = p - center;
                let ang = v.arg();
                let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
                let sweep_full = hi - lo >= 2.0 * PI - 1e-12;
                let mut inside = sweep_full;
                if !inside {
                    let mut a = ang;
                    while a < lo {
                        a += 2.0 * PI;
                    }
                    inside = a <= hi;
                }
                let endpoint = (self.point(0.0) - p).norm().min((self.point(1.0) - p).norm());
                if inside {
                    (v.norm() - radius).abs().min(endpoint)
                } else {
                    endpoint
                }
            }
        }
    }
}

/// A path in `C`, read modulo `2Z + 2iZ` by the periodic connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPath {
    pub pieces: Vec<PathPiece>,
}

impl TorusPath {
    /// Polyline through the waypoints; consecutive waypoints must differ.
    pub fn polyline(waypoints: &[Complex64]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config("a path needs at least two waypoints".into()));
        }
        let mut pieces = Vec::with_capacity(waypoints.len() - 1);
        for w in waypoints.windows(2) {
            if (w[1] - w[0]).norm() == 0.0 {
                return Err(Error::Config("consecutive waypoints coincide".into()));
            }
            pieces.push(PathPiece::Segment { from: w[0], to: w[1] });
        }
        Ok(Self { pieces })
    }

    /// Full counterclockwise circle starting at angle `start`.
    pub fn circle(center: Complex64, radius: f64, start: f64) -> Self {
        Self {
            pieces: vec![PathPiece::Arc {
                center,
                radius,
                start,
                end: start + 2.0 * PI,
            }],
        }
    }

    pub fn then(mut self, other: &TorusPath) -> Self {
        self.pieces.extend(other.pieces.iter().copied());
        self
    }

    pub fn reversed(&self) -> Self {
        Self {
            pieces: self.pieces.iter().rev().map(|p| p.reversed()).collect(),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.pieces[0].point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.pieces.last().map(|p| p.end_point()).unwrap_or_default()
    }

    /// Smallest distance to any pole of `form` (poles repeat with period 2).
    pub fn clearance(&self, form: &MatrixOneForm) -> f64 {
        let mut best = f64::INFINITY;
        for piece in &self.pieces {
            // candidate pole translates near the piece
            let (lo_re, hi_re, lo_im, hi_im) = bounding_box(piece);
            for &p in &form.pole_set {
                let kx0 = ((lo_re - p.re) / 2.0).floor() as i64 - 1;
                let kx1 = ((hi_re - p.re) / 2.0).ceil() as i64 + 1;
                let ky0 = ((lo_im - p.im) / 2.0).floor() as i64 - 1;
                let ky1 = ((hi_im - p.im) / 2.0).ceil() as i64 + 1;
                for kx in kx0..=kx1 {
                    for ky in ky0..=ky1 {
                        let q = p + Complex64::new(2.0 * kx as f64, 2.0 * ky as f64);
                        best = best.min(piece.distance_to(q));
                    }
                }
            }
        }
        best
    }
}

fn bounding_box(piece: &PathPiece) -> (f64, f64, f64, f64) {
    match *piece {
        PathPiece::Segment { from, to } => (
            from.re.min(to.re),
            from.re.max(to.re),
            from.im.min(to.im),
            from.im.max(to.im),
        ),
        PathPiece::Arc { center, radius, .. } => (
            center.re - radius,
            center.re + radius,
            center.im - radius,
            center.im + radius,
        ),
    }
}

/// Options for [`transport_with`].
#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    pub tol: f64,
    pub min_clearance: f64,
}

impl TransportOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            min_clearance: DEFAULT_MIN_CLEARANCE,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Config(format!("transport tolerance {tol:e} outside [1e-13, 1e-6]")));
    }
    Ok(())
}

/// Transport of `form` along `path` with the default clearance.
pub fn transport(form: &MatrixOneForm, path: &TorusPath, tol: f64) -> Result<Mat2> {
    transport_with(form, path, &TransportOptions::new(tol))
}

pub fn transport_with(form: &MatrixOneForm, path: &TorusPath, opts: &TransportOptions) -> Result<Mat2> {
    Ok(*transport_cumulative(form, path, opts)?.last().expect("non-empty path"))
}

/// Transport matrices after each piece of the path.
pub fn transport_cumulative(
    form: &MatrixOneForm,
    path: &TorusPath,
    opts: &TransportOptions,
) -> Result<Vec<Mat2>> {
    check_tol(opts.tol)?;
    let clearance = path.clearance(form);
    if clearance < opts.min_clearance - 1e-12 {
        return Err(Error::Clearance {
            clearance,
            required: opts.min_clearance,
        });
    }
    let mut y = linalg::identity();
    let mut out = Vec::with_capacity(path.pieces.len());
    let mut stats = ode::Stats::default();
    for piece in &path.pieces {
        let k = |s: f64| -form.contract(piece.point(s), piece.velocity(s));
        y = ode::integrate(k, 0.0, 1.0, y, opts.tol, &mut stats)?;
        out.push(y);
    }
    Ok(out)
}

/// Period loop `z0 -> z0 + 2`.
pub fn loop_a() -> TorusPath {
    TorusPath::polyline(&[BASEPOINT, BASEPOINT + 2.0]).expect("distinct points")
}

/// Period loop `z0 -> z0 + 2i`.
pub fn loop_b() -> TorusPath {
    TorusPath::polyline(&[BASEPOINT, BASEPOINT + c(0.0, 2.0)]).expect("distinct points")
}

/// Representatives of the punctures `0, 1, i, 1+i` inside the square with corner `z0`.
pub fn puncture_representatives() -> [Complex64; 4] {
    [c(2.0, 2.0), c(1.0, 2.0), c(2.0, 1.0), c(1.0, 1.0)]
}

/// Tail from the base point to the start of the circle around puncture `p`.
pub fn lasso_tail(p: Complex64) -> TorusPath {
    let d = (p - HUB) / (p - HUB).norm();
    let start = p - PUNCTURE_RADIUS * d;
    TorusPath::polyline(&[BASEPOINT, BASEPOINT + 1.0, HUB, start]).expect("distinct points")
}

/// Counterclockwise lasso around puncture `p`, based at `z0`.
pub fn lasso(p: Complex64) -> TorusPath {
    let tail = lasso_tail(p);
    let ang = (HUB - p).arg();
    tail.clone()
        .then(&TorusPath::circle(p, PUNCTURE_RADIUS, ang))
        .then(&tail.reversed())
}

/// Monodromy of a connection on the 4-punctured torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyRep {
    /// Loop `z -> z + 2`.
    pub m_a: Mat2,
    /// Loop `z -> z + 2i`.
    pub m_b: Mat2,
    /// Lassos around the punctures `0, 1, i, 1+i`.
    pub punctures: [Mat2; 4],
    pub basepoint: Complex64,
}

impl MonodromyRep {
    /// `M_B^{-1} M_A^{-1} M_B M_A`, the transport along the boundary of the period square.
    pub fn boundary_loop(&self) -> Mat2 {
        let ia = linalg::sl2_inverse(&self.m_a);
        let ib = linalg::sl2_inverse(&self.m_b);
        ib * ia * self.m_b * self.m_a
    }

    /// Ordered product of the puncture lassos matching [`Self::boundary_loop`]:
    /// `P_{1+i} P_{1} P_{0} P_{i}` (rightmost factor traversed first). This is
    /// the counterclockwise order of the lassos around the hub, starting from
    /// the puncture below and to the right of it.
    pub fn puncture_product(&self) -> Mat2 {
        let [p0, p1, pi, p1i] = self.punctures;
        p1i * p1 * p0 * pi
    }

    /// Residual of the fundamental-group relation.
    pub fn relation_residual(&self) -> f64 {
        linalg::dist(&self.boundary_loop(), &self.puncture_product())
    }
}

/// Monodromy of the rank-2 connection built from `(x, a)`; only the period loops.
pub fn period_monodromy(th: &ThetaFn, p: AffineConnCoord, tol: f64) -> Result<(Mat2, Mat2)> {
    let form = build_form_with(th, p)?;
    let ma = transport(&form, &loop_a(), tol)?;
    let mb = transport(&form, &loop_b(), tol)?;
    Ok((ma, mb))
}

/// Full monodromy representation: period loops and puncture lassos.
pub fn torus_monodromy(p: AffineConnCoord, tol: f64) -> Result<MonodromyRep> {
    let form = build_form_with(&ThetaFn::default(), p)?;
    form_monodromy(&form, tol)
}

pub fn form_monodromy(form: &MatrixOneForm, tol: f64) -> Result<MonodromyRep> {
    let m_a = transport(form, &loop_a(), tol)?;
    let m_b = transport(form, &loop_b(), tol)?;
    let reps = puncture_representatives();
    let mut punctures = [linalg::identity(); 4];
    for (slot, &p) in punctures.iter_mut().zip(reps.iter()) {
        *slot = transport(form, &lasso(p), tol)?;
    }
    Ok(MonodromyRep {
        m_a,
        m_b,
        punctures,
        basepoint: BASEPOINT,
    })
}

/// Closed-form holonomies `(e^{-2 pi (a - x)}, e^{-2 pi i (a + x)})` of the line
/// connection `d + pi a dz - pi x dzbar` along `z -> z+2` and `z -> z+2i`.
pub fn abelian_monodromy(p: AffineConnCoord) -> (Complex64, Complex64) {
    let i = c(0.0, 1.0);
    ((-2.0 * PI * (p.a - p.x)).exp(), (-2.0 * PI * i * (p.a + p.x)).exp())
}

/// Tolerance for the reducibility test on the commutator.
pub const REDUCIBLE_TOL: f64 = 1e-6;

/// Distance of the commutator `[M_A, M_B]` to `{Id, -Id}`.
pub fn commutator_distance(m_a: &Mat2, m_b: &Mat2) -> f64 {
    let comm = m_a * m_b * linalg::sl2_inverse(m_a) * linalg::sl2_inverse(m_b);
    let id = linalg::identity();
    linalg::dist(&comm, &id).min(linalg::dist(&comm, &(-id)))
}

/// `(Im tr M_A, Im tr M_B)` without any reducibility check.
pub fn trace_defect(m_a: &Mat2, m_b: &Mat2) -> (f64, f64) {
    (m_a.trace().im, m_b.trace().im)
}

/// `(Im tr M_A, Im tr M_B)`, refusing representations with (near) commuting period loops.
pub fn unitarity_defect(rep: &MonodromyRep) -> Result<(f64, f64)> {
    let d = commutator_distance(&rep.m_a, &rep.m_b);
    if d < REDUCIBLE_TOL {
        return Err(Error::Reducible(d));
    }
    Ok(trace_defect(&rep.m_a, &rep.m_b))
}

/// Trace data of the period loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTriple {
    pub tr_a: Complex64,
    pub tr_b: Complex64,
    pub tr_ab: Complex64,
}

impl TraceTriple {
    pub fn of(m_a: &Mat2, m_b: &Mat2) -> Self {
        Self {
            tr_a: m_a.trace(),
            tr_b: m_b.trace(),
            tr_ab: (m_a * m_b).trace(),
        }
    }

    /// `tr^2 A + tr^2 B + tr^2 AB - trA trB trAB - 4`, i.e. `tr [A, B] - 2`.
    pub fn fricke(&self) -> f64 {
        let (x, y, z) = (self.tr_a.re, self.tr_b.re, self.tr_ab.re);
        x * x + y * y + z * z - x * y * z - 4.0
    }

    /// Real traces in `[-2, 2]` with non-positive Fricke discriminant.
    pub fn su2_realizable(&self, tol: f64) -> bool {
        let real = self.tr_a.im.abs() <= tol && self.tr_b.im.abs() <= tol && self.tr_ab.im.abs() <= tol;
        let bounded = [self.tr_a.re, self.tr_b.re, self.tr_ab.re]
            .iter()
            .all(|t| t.abs() <= 2.0 + tol);
        real && bounded && self.fricke() <= tol
    }
}

/// Post-hoc SU(2) check on the period loops of `rep`.
pub fn su2_realizable(rep: &MonodromyRep, tol: f64) -> bool {
    TraceTriple::of(&rep.m_a, &rep.m_b).su2_realizable(tol)
}
