//! Surface reconstruction: the lambda-family of connections from spectral
//! data, unitarization of its monodromy, Iwasawa factorization of the
//! holomorphic frame and the Sym formula `f = F(lambda_1) F(lambda_2)^{-1}`.
//!
//! The frame over the torus is followed along paths that start at the base
//! point, run along the bottom edge `Im z = 1/2` of the domain
//! `[1/2, 5/2] x [1/2, 5/2]` and then straight up. Crossing the vertical
//! segments `Re z in {1, 2}, 1 < Im z < 2` changes the sheet of the threefold
//! cover; the other two sheets come from the order-three symmetry.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{build_form_with, MatrixOneForm};
use crate::error::{Error, Result};
use crate::iwasawa::{
    circle_nodes, dress_unitary_frame, unitarize_loop, FourierLoop, IwasawaOptions, LoopSample,
    SimpleFactor,
};
use crate::linalg::{self, c, Mat2};
use crate::moduli::AffineConnCoord;
use crate::monodromy::{
    form_monodromy, transport_cumulative, MonodromyRep, TorusPath, TransportOptions, BASEPOINT,
};
use crate::spectral::{SpectralData, SpectralSolver, SymConfig};
use crate::theta::ThetaFn;

/// Offset of the lambda nodes: half a spacing, so that no node sits on a Sym point.
pub const NODE_OFFSET: f64 = 0.5;

/// Local frame change at a fixed point of `z -> -z`: `t1 = s1 - (z/2) s2`,
/// `t2 = s1 + (z/2) s2`, i.e. `[t1 t2] = [s1 s2] C(z)` with
/// `C(z) = [[1, 1], [-z/2, z/2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GluingFrame {
    pub z: Complex64,
}

impl GluingFrame {
    pub fn new(z: Complex64) -> Self {
        Self { z }
    }

    /// `C(z)`.
    pub fn t_from_s(&self) -> Mat2 {
        let h = self.z / 2.0;
        Mat2::new(c(1.0, 0.0), c(1.0, 0.0), -h, h)
    }

    /// `C(z)^{-1}`: `s1 = (t1 + t2)/2`, `s2 = (t2 - t1)/z`.
    pub fn s_from_t(&self) -> Result<Mat2> {
        if self.z.norm() == 0.0 {
            return Err(Error::Degenerate("gluing frame at the fixed point".into()));
        }
        let iz = 1.0 / self.z;
        Ok(Mat2::new(c(0.5, 0.0), -iz, c(0.5, 0.0), iz))
    }

    /// `t1 ^ t2` in units of `s1 ^ s2`: equals `z`.
    pub fn determinant(&self) -> Complex64 {
        self.t_from_s().determinant()
    }

    /// Frame `G(t) = diag(1, -i) C(t)^T` in which the connection built from
    /// odd spectral data is even in `t`, so depends on `lambda = t^2` only,
    /// with a nilpotent simple pole at `lambda = 0` whose residue is
    /// `(-2 pi a_{-1} + 1/(6 x_1)) dz` in the lower left slot. It satisfies
    /// `G(-t) = i J G(t)` with `J = [[0, 1], [-1, 0]]`.
    ///
    /// Replacing `-i` by `i` also gives an even family with a nilpotent pole
    /// (residue `-2 pi a_{-1} - 1/(6 x_1)`), but that family is not related to
    /// this one by a gauge holomorphic at `lambda = 0` and reconstructs a
    /// different surface.
    pub fn lambda_frame(t: Complex64) -> Mat2 {
        linalg::diag(c(1.0, 0.0), c(0.0, -1.0)) * Self::new(t).t_from_s().transpose()
    }
}

/// The connection at spectral parameter `t` in the frame [`GluingFrame::lambda_frame`].
pub fn desingularized_form(th: &ThetaFn, p: AffineConnCoord, t: Complex64) -> Result<MatrixOneForm> {
    build_form_with(th, p)?.conjugated(GluingFrame::lambda_frame(t))
}

/// Transport of the desingularized connection along `path`.
pub fn desingularized_transport(
    th: &ThetaFn,
    p: AffineConnCoord,
    t: Complex64,
    path: &TorusPath,
    opts: &TransportOptions,
) -> Result<Mat2> {
    let form = desingularized_form(th, p, t)?;
    Ok(*transport_cumulative(&form, path, opts)?
        .last()
        .expect("non-empty path"))
}

/// Positive definite Hermitian `H` with `M^* H M = H` for all generators, with
/// `det H = 1`. Returns `H` and the relative size of the smallest singular
/// value of the stacked linear system (zero for an exactly unitarizable set).
pub fn invariant_hermitian_form(gens: &[Mat2]) -> Result<(Mat2, f64)> {
    let basis = [
        Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
        Mat2::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        Mat2::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)),
    ];
    let mut sys = DMatrix::<f64>::zeros(4 * gens.len(), 4);
    for (g, m) in gens.iter().enumerate() {
        for (k, b) in basis.iter().enumerate() {
            let e = m.adjoint() * b * m - b;
            sys[(4 * g, k)] = e[(0, 0)].re;
            sys[(4 * g + 1, k)] = e[(1, 1)].re;
            sys[(4 * g + 2, k)] = e[(0, 1)].re;
            sys[(4 * g + 3, k)] = e[(0, 1)].im;
        }
    }
    let svd = sys.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let smax = svd.singular_values.max();
    let v = v_t.row(imin);
    let mut h = (0..4).fold(Mat2::zeros(), |acc, k| acc + basis[k] * c(v[k], 0.0));
    if h.trace().re < 0.0 {
        h = -h;
    }
    let det = h.determinant().re;
    if det <= 0.0 {
        return Err(Error::Rejected(format!(
            "invariant form is indefinite (det {det:.3e}): monodromy not unitarizable"
        )));
    }
    Ok((h / c(det.sqrt(), 0.0), smin / smax.max(f64::MIN_POSITIVE)))
}

/// Options of the reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    /// Number of lambda nodes on the unit circle (power of two).
    pub n_lambda: usize,
    pub transport_tol: f64,
    pub iwasawa: IwasawaOptions,
    pub sym: SymConfig,
    /// Distance of the mesh columns from the puncture lines `Re z = 1, 2`.
    pub gap: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            n_lambda: 256,
            transport_tol: 1e-11,
            iwasawa: IwasawaOptions {
                truncation: 64,
                tol: 1e-8,
                ..IwasawaOptions::default()
            },
            sym: SymConfig::minimal(),
            gap: 1e-5,
        }
    }
}

/// Per-node data of the lambda family.
#[derive(Debug, Clone)]
pub struct LambdaNode {
    pub lambda: Complex64,
    pub t: Complex64,
    pub coord: AffineConnCoord,
    pub form: MatrixOneForm,
    pub rep: MonodromyRep,
    /// `H^{-1/2}` for the invariant form `H`.
    pub h: Mat2,
    pub h_inv: Mat2,
    pub unitarizability_defect: f64,
}

/// Diagnostics of the lambda family and the Sym points.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FamilyReport {
    pub n_lambda: usize,
    pub max_unitarizability_defect: f64,
    pub max_relation_residual: f64,
    /// Distance of the period monodromies at the Sym points to `±Id`.
    pub closing_defect: f64,
    /// `max |tr U - 1|` for the sheet-changing puncture loop at the Sym points.
    pub order_three_defect: f64,
    /// Distance of the cube of a puncture lasso (the loop around the point on
    /// the threefold cover) to `-Id`, maximized over nodes and punctures.
    pub lifted_puncture_defect: f64,
    /// Fourier tail of the base frame beyond `n/4` modes.
    pub frame_tail: f64,
}

/// Lambda family prepared for Sym evaluation.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub opts: ReconstructOptions,
    pub theta: ThetaFn,
    pub nodes: Vec<LambdaNode>,
    /// Unitary factor of the frame at the base point, per node.
    base_frames: Vec<Mat2>,
    /// Sheet map `(U(lambda_1), U(lambda_2))` in the base-normalized frame.
    pub sheet_map: (Mat2, Mat2),
    pub report: FamilyReport,
}

/// Connections, monodromies and unitarizing forms at the lambda nodes.
pub fn lambda_family(
    solver: &SpectralSolver,
    d: &SpectralData,
    opts: &ReconstructOptions,
) -> Result<Vec<LambdaNode>> {
    let theta = solver.au.theta.clone();
    circle_nodes(opts.n_lambda, NODE_OFFSET)
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| {
            Reconstruction::node(solver, &theta, d, lambda, opts.transport_tol).map_err(|e| {
                Error::AtNode {
                    index: j,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Index of the puncture `1+i` in [`MonodromyRep::punctures`]; its lasso
/// crosses the cut `Re z = 1, 1 < Im z < 2`.
const SHEET_PUNCTURE: usize = 3;

impl Reconstruction {
    /// Build the lambda family from spectral data, using `a^u(x(t))` on the
    /// circle so that every node is exactly unitarizable.
    pub fn new(solver: &SpectralSolver, d: &SpectralData, opts: ReconstructOptions) -> Result<Self> {
        let n = opts.n_lambda;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!("n_lambda must be a power of two >= 8, got {n}")));
        }
        let theta = solver.au.theta.clone();
        let nodes = lambda_family(solver, d, &opts)?;
        let base: Vec<Mat2> = nodes.iter().map(|nd| nd.h_inv).collect();
        let base_sample = LoopSample::new(base, NODE_OFFSET)?;
        let base_fac = unitarize_loop(&base_sample, &opts.iwasawa)?;
        let base_frames = base_fac.unitary;
        let frame_tail = FourierLoop::from_samples(&base_frames, NODE_OFFSET).tail(n / 4);

        let normalized = |m: &dyn Fn(&LambdaNode) -> Mat2| -> (Mat2, Mat2) {
            let vals: Vec<Mat2> = nodes
                .iter()
                .zip(&base_frames)
                .map(|(nd, fb)| fb.adjoint() * nd.h_inv * m(nd) * nd.h * fb)
                .collect();
            let fl = FourierLoop::from_samples(&vals, NODE_OFFSET);
            (fl.eval(opts.sym.lambda_1, 0.0), fl.eval(opts.sym.lambda_2, 0.0))
        };
        let sheet_map = normalized(&|nd| linalg::sl2_inverse(&nd.rep.punctures[SHEET_PUNCTURE]));
        let (a1, a2) = normalized(&|nd| linalg::sl2_inverse(&nd.rep.m_a));
        let (b1, b2) = normalized(&|nd| linalg::sl2_inverse(&nd.rep.m_b));
        let id = linalg::identity();
        let pm = |m: &Mat2| linalg::dist(m, &id).min(linalg::dist(m, &(-id)));
        let closing_defect = [a1, a2, b1, b2].iter().map(pm).fold(0.0, f64::max);
        let order_three_defect = [sheet_map.0, sheet_map.1]
            .iter()
            .map(|u| (u.trace() - 1.0).norm())
            .fold(0.0, f64::max);
        let lifted_puncture_defect = nodes
            .iter()
            .flat_map(|nd| nd.rep.punctures.iter())
            .map(|p| linalg::dist(&(p * p * p), &(-id)))
            .fold(0.0, f64::max);
        let report = FamilyReport {
            n_lambda: n,
            max_unitarizability_defect: nodes
                .iter()
                .map(|nd| nd.unitarizability_defect)
                .fold(0.0, f64::max),
            max_relation_residual: nodes
                .iter()
                .map(|nd| nd.rep.relation_residual())
                .fold(0.0, f64::max),
            closing_defect,
            order_three_defect,
            lifted_puncture_defect,
            frame_tail,
        };
        Ok(Self {
            opts,
            theta,
            nodes,
            base_frames,
            sheet_map,
            report,
        })
    }

    pub fn node(
        solver: &SpectralSolver,
        theta: &ThetaFn,
        d: &SpectralData,
        lambda: Complex64,
        tol: f64,
    ) -> Result<LambdaNode> {
        let t = lambda.sqrt();
        let x = d.x_at(t);
        let a = solver.a_u(x)?;
        let coord = AffineConnCoord::new(x, a);
        let form = desingularized_form(theta, coord, t)?;
        let rep = form_monodromy(&form, tol)?;
        let mut gens = vec![rep.m_a, rep.m_b];
        gens.extend(rep.punctures);
        let (hform, defect) = invariant_hermitian_form(&gens)?;
        let h = linalg::hermitian_sqrt(&hform)
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular invariant form".into()))?;
        let h_inv = linalg::hermitian_sqrt(&hform);
        Ok(LambdaNode {
            lambda,
            t,
            coord,
            form,
            rep,
            h,
            h_inv,
            unitarizability_defect: defect,
        })
    }

    pub fn offset(&self) -> f64 {
        NODE_OFFSET
    }

    fn transport_opts(&self) -> TransportOptions {
        TransportOptions {
            tol: self.opts.transport_tol,
            min_clearance: 0.5 * self.opts.gap,
        }
    }

    /// Base-normalized unitary frames at the nodes from the transports `ys[j]`
    /// (base point to the evaluation point).
    pub fn unitary_frames(&self, ys: &[Mat2]) -> Result<Vec<Mat2>> {
        Ok(self.unitary_frames_checked(ys)?.0)
    }

    /// [`Self::unitary_frames`] together with the factorization residual
    /// `max ||Psi - F B||` and unitarity error `max ||F F^* - Id||`.
    pub fn unitary_frames_checked(&self, ys: &[Mat2]) -> Result<(Vec<Mat2>, f64, f64)> {
        let psi: Vec<Mat2> = self
            .nodes
            .iter()
            .zip(ys)
            .map(|(nd, y)| nd.h_inv * linalg::sl2_inverse(y))
            .collect();
        let fac = unitarize_loop(&LoopSample::new(psi, NODE_OFFSET)?, &self.opts.iwasawa)?;
        let frames = fac
            .unitary
            .iter()
            .zip(&self.base_frames)
            .map(|(f, fb)| fb.adjoint() * f)
            .collect();
        Ok((frames, fac.residual, fac.unitarity_error))
    }

    /// Sym formula on node frames; `f(base) = Id`.
    pub fn sym_from_frames(&self, frames: &[Mat2]) -> Result<Mat2> {
        let fl = FourierLoop::from_samples(frames, NODE_OFFSET);
        let f1 = fl.eval(self.opts.sym.lambda_1, 0.0);
        let f2 = fl.eval(self.opts.sym.lambda_2, 0.0);
        let f2i = f2
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular frame at a Sym point".into()))?;
        Ok(f1 * f2i)
    }

    /// Transports from the base point to `p` along the bottom edge and then
    /// vertically, one per node.
    pub fn transports_to(&self, p: Complex64) -> Result<Vec<Mat2>> {
        let corner = c(p.re, BASEPOINT.im);
        let mut pts = vec![BASEPOINT];
        for q in [corner, p] {
            if (q - *pts.last().expect("non-empty")).norm() > 0.0 {
                pts.push(q);
            }
        }
        if pts.len() == 1 {
            return Ok(vec![linalg::identity(); self.nodes.len()]);
        }
        let path = TorusPath::polyline(&pts)?;
        let opts = self.transport_opts();
        self.nodes
            .par_iter()
            .map(|nd| Ok(*transport_cumulative(&nd.form, &path, &opts)?.last().expect("non-empty")))
            .collect()
    }

    /// `f(p)` on the sheet reached by the standard path, with `f(base) = Id`.
    pub fn sym_evaluate(&self, p: Complex64) -> Result<Mat2> {
        let ys = self.transports_to(p)?;
        self.sym_from_frames(&self.unitary_frames(&ys)?)
    }

    /// Apply the sheet map `k` times.
    pub fn sheet_image(&self, f: &Mat2, k: usize) -> Mat2 {
        let (u1, u2) = self.sheet_map;
        let u2i = u2.adjoint();
        let mut g = *f;
        for _ in 0..k % 3 {
            g = u1 * g * u2i;
        }
        g
    }

    /// Isometry `f -> A f B^{-1}` bringing the sheet map to the normal form
    /// `(a, b) -> (exp(2 pi i/3) a, b)`, i.e. `A U_1 A^{-1} = L` and
    /// `B U_2 B^{-1} = L^{-1}` with `L = diag(exp(i pi/3), exp(-i pi/3))`.
    pub fn positioning(&self) -> (Mat2, Mat2) {
        let w = Complex64::from_polar(1.0, PI / 3.0);
        let a = diagonalizer(&self.sheet_map.0, w);
        let b = diagonalizer(&self.sheet_map.1, w.conj());
        (a, b)
    }

    /// `|f(p) dz dz| / |df|^2` by central differences with step `h`: zero for a
    /// conformal immersion.
    pub fn conformality_defect(&self, p: Complex64, h: f64) -> Result<f64> {
        let pts = [p + h, p - h, p + c(0.0, h), p - c(0.0, h)];
        let mut v = Vec::with_capacity(4);
        for q in pts {
            v.push(to_r4(&self.sym_evaluate(q)?));
        }
        let fx: [f64; 4] = std::array::from_fn(|i| (v[0][i] - v[1][i]) / (2.0 * h));
        let fy: [f64; 4] = std::array::from_fn(|i| (v[2][i] - v[3][i]) / (2.0 * h));
        let e = dot(&fx, &fx);
        let g = dot(&fy, &fy);
        let f = dot(&fx, &fy);
        Ok(((e - g).powi(2) + 4.0 * f * f).sqrt() / (e + g))
    }
}

/// Unitary `A` with `det A = 1` and `A U A^{-1} = diag(w, conj w)`, where
/// `w` is the eigenvalue of `U` closest to the requested one.
fn diagonalizer(u: &Mat2, w: Complex64) -> Mat2 {
    let (l1, l2) = linalg::eigenvalues(u);
    let mu = if (l1 - w).norm() <= (l2 - w).norm() { l1 } else { l2 };
    let v = linalg::eigenvector(u, mu);
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let (v0, v1) = (v[0] / n, v[1] / n);
    // rows: v^*, and the orthogonal complement; det = 1
    Mat2::new(v0.conj(), v1.conj(), -v1, v0)
}

/// `(Re a, Im a, Re b, Im b)` for `f = [[a, -conj b], [b, conj a]]`.
pub fn to_r4(f: &Mat2) -> [f64; 4] {
    let [a, b] = linalg::su2_to_s3(f);
    [a.re, a.im, b.re, b.im]
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Area of a triangle in `R^4`.
pub fn triangle_area(p: &[f64; 4], q: &[f64; 4], r: &[f64; 4]) -> f64 {
    let u: [f64; 4] = std::array::from_fn(|i| q[i] - p[i]);
    let v: [f64; 4] = std::array::from_fn(|i| r[i] - p[i]);
    let uu = dot(&u, &u);
    let vv = dot(&v, &v);
    let uv = dot(&u, &v);
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}

/// Points of `[lo, hi]` clustered quadratically toward the ends flagged in `toward`.
pub fn graded(lo: f64, hi: f64, cells: usize, toward: (bool, bool)) -> Vec<f64> {
    (0..=cells)
        .map(|k| {
            let s = k as f64 / cells as f64;
            let g = match toward {
                (true, true) => {
                    let u = 2.0 * s - 1.0;
                    0.5 * (1.0 + u.signum() * (1.0 - (1.0 - u.abs()).powi(2)))
                }
                (true, false) => s * s,
                (false, true) => 1.0 - (1.0 - s).powi(2),
                (false, false) => s,
            };
            lo + (hi - lo) * g
        })
        .collect()
}

/// Triangle mesh of the surface in `S^3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMesh {
    /// `(Re a, Im a, Re b, Im b)` per vertex.
    pub vertices: Vec<[f64; 4]>,
    pub faces: Vec<[usize; 3]>,
    pub sheets: usize,
    pub columns: usize,
    pub rows: usize,
}

impl SurfaceMesh {
    /// Sheet of vertex `v`: sheet `k` is the image of sheet 0 under the
    /// `k`-th power of the order-3 symmetry, so `(sheet, v mod sheet size)`
    /// identifies the symmetry orbit.
    pub fn sheet_of(&self, v: usize) -> usize {
        v / (self.columns * self.rows)
    }

    pub fn area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| triangle_area(&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]))
            .sum()
    }

    /// `max ||v| - 1|`.
    pub fn sphere_defect(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| (dot(v, v).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance from the normal-form image `(w a, b)` of a vertex to
    /// the nearest vertex (brute force over a spatial hash).
    pub fn order_three_defect(&self) -> f64 {
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let cell = 0.05;
        let key = |v: &[f64; 4]| -> [i64; 4] { std::array::from_fn(|i| (v[i] / cell).floor() as i64) };
        let mut grid: std::collections::HashMap<[i64; 4], Vec<usize>> = Default::default();
        for (i, v) in self.vertices.iter().enumerate() {
            grid.entry(key(v)).or_default().push(i);
        }
        self.vertices
            .par_iter()
            .map(|v| {
                let a = c(v[0], v[1]) * w;
                let img = [a.re, a.im, v[2], v[3]];
                let k = key(&img);
                let mut best = f64::INFINITY;
                for d in 0..81 {
                    let off = [d % 3, (d / 3) % 3, (d / 9) % 3, d / 27];
                    let kk: [i64; 4] = std::array::from_fn(|i| k[i] + off[i] as i64 - 1);
                    if let Some(list) = grid.get(&kk) {
                        for &j in list {
                            let u = &self.vertices[j];
                            let dd: f64 = (0..4).map(|i| (u[i] - img[i]).powi(2)).sum();
                            best = best.min(dd.sqrt());
                        }
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Diagnostics of a mesh build.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeshReport {
    pub vertices: usize,
    pub faces: usize,
    pub sheets: usize,
    pub sphere_defect: f64,
    /// `None` for dressed builds, which carry a single sheet.
    pub order_three_defect: Option<f64>,
    /// Mismatch of the vertices on both sides of the sheet-changing cuts.
    pub seam_defect: f64,
    /// Sheet offsets across the cuts at `Re z = 1` and `Re z = 2`.
    pub seam_shift: [usize; 2],
    /// Largest Iwasawa residual `||Psi - F B||` over the mesh points.
    pub iwasawa_residual: f64,
    /// Largest unitarity error of `F` over the mesh points.
    pub iwasawa_unitarity: f64,
    /// Area of one sheet over the torus domain.
    pub sheet_area: f64,
    /// Area of the closed surface: three sheets cover it twice. `None` for
    /// dressed builds, whose patch does not close up.
    pub area: Option<f64>,
    pub dressed: bool,
}

/// Largest allowed mismatch across the sheet-changing cuts.
pub const SEAM_TOL: f64 = 1e-4;

/// Distance from the punctures below which cut rows are not seam-checked.
pub const SEAM_MARGIN: f64 = 0.05;

/// Build the mesh; with `dress`, the frames are dressed by the simple factor
/// and only the sheet reached by the standard paths is produced.
pub fn build_mesh(
    rec: &Reconstruction,
    cells: usize,
    dress: Option<&SimpleFactor>,
) -> Result<(SurfaceMesh, MeshReport)> {
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::Config(format!("mesh cells must be even and >= 2, got {cells}")));
    }
    let g = rec.opts.gap;
    let half = cells / 2;
    let strips = [
        graded(0.5, 1.0 - g, half, (false, true)),
        graded(1.0 + g, 2.0 - g, cells, (true, true)),
        graded(2.0 + g, 2.5, half, (true, false)),
    ];
    let xs: Vec<f64> = strips.iter().flatten().copied().collect();
    let mut ys = graded(0.5, 1.0, half, (false, true));
    ys.extend(graded(1.0, 2.0, cells, (true, true)).into_iter().skip(1));
    ys.extend(graded(2.0, 2.5, half, (true, false)).into_iter().skip(1));
    let (nx, ny) = (xs.len(), ys.len());

    // transports: bottom edge, then columns
    let topts = rec.transport_opts();
    let bottom_pts: Vec<Complex64> = xs.iter().map(|&x| c(x, 0.5)).collect();
    let bottom_path = TorusPath::polyline(&bottom_pts)?;
    let bottoms: Vec<Vec<Mat2>> = rec
        .nodes
        .par_iter()
        .map(|nd| {
            let mut v = vec![linalg::identity()];
            v.extend(transport_cumulative(&nd.form, &bottom_path, &topts)?);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..nx)
        .flat_map(|ci| (0..rec.nodes.len()).map(move |j| (ci, j)))
        .collect();
    let cols: Vec<Vec<Mat2>> = jobs
        .par_iter()
        .map(|&(ci, j)| {
            let pts: Vec<Complex64> = ys.iter().map(|&y| c(xs[ci], y)).collect();
            let path = TorusPath::polyline(&pts)?;
            let mut v = vec![linalg::identity()];
            v.extend(transport_cumulative(&rec.nodes[j].form, &path, &topts)?);
            let b = bottoms[j][ci];
            Ok(v.into_iter().map(|y| y * b).collect())
        })
        .collect::<Result<_>>()?;
    let nl = rec.nodes.len();
    let offset = rec.offset();
    let evaluated: Vec<(Mat2, f64, f64)> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (ci, ri) = (idx / ny, idx % ny);
            let ys_node: Vec<Mat2> = (0..nl).map(|j| cols[ci * nl + j][ri]).collect();
            let (mut fr, res, unit) = rec.unitary_frames_checked(&ys_node)?;
            if let Some(d) = dress {
                fr = dress_unitary_frame(&fr, offset, d)?;
            }
            Ok((rec.sym_from_frames(&fr)?, res, unit))
        })
        .collect::<Result<_>>()?;
    let base: Vec<Mat2> = evaluated.iter().map(|e| e.0).collect();
    let iwasawa_residual = evaluated.iter().map(|e| e.1).fold(0.0, f64::max);
    let iwasawa_unitarity = evaluated.iter().map(|e| e.2).fold(0.0, f64::max);

    let at = |ci: usize, ri: usize| ci * ny + ri;
    let in_cut = |ri: usize| ys[ri] >= 1.0 - 1e-12 && ys[ri + 1] <= 2.0 + 1e-12;
    // sheet shift across each cut, chosen by matching
    let left_cols = [strips[0].len() - 1, strips[0].len() + strips[1].len() - 1];
    let mut seam_shift = [0usize; 2];
    let mut seam_defect: f64 = 0.0;
    if dress.is_none() {
        for (s, &lc) in left_cols.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for k in 1..3 {
                let mut worst: f64 = 0.0;
                // near the punctures at the cut ends the map is only Hölder
                // continuous and the gap dominates the mismatch
                let inner = |y: f64| (1.0 + SEAM_MARGIN..=2.0 - SEAM_MARGIN).contains(&y);
                for ri in (0..ny).filter(|&ri| inner(ys[ri])) {
                    let l = rec.sheet_image(&base[at(lc, ri)], k);
                    worst = worst.max(linalg::dist(&l, &base[at(lc + 1, ri)]));
                }
                if worst < best.0 {
                    best = (worst, k);
                }
            }
            seam_shift[s] = best.1;
            seam_defect = seam_defect.max(best.0);
        }
        if !(seam_defect <= SEAM_TOL) {
            return Err(Error::Rejected(format!(
                "seam mismatch {seam_defect:.3e} exceeds {SEAM_TOL:e}"
            )));
        }
    }

    let sheets = if dress.is_some() { 1 } else { 3 };
    // the same isometry for dressed builds, so that vertices are comparable
    let (pa, pb) = rec.positioning();
    let pbi = pb.adjoint();
    let mut vertices = Vec::with_capacity(sheets * nx * ny);
    for k in 0..sheets {
        for f in &base {
            vertices.push(to_r4(&(pa * rec.sheet_image(f, k) * pbi)));
        }
    }
    let vid = |k: usize, ci: usize, ri: usize| (k % sheets) * nx * ny + at(ci, ri);
    let mut faces = Vec::new();
    let mut sheet_faces = 0;
    for k in 0..sheets {
        for ci in 0..nx - 1 {
            let gap_col = left_cols.iter().position(|&lc| lc == ci);
            for ri in 0..ny - 1 {
                let (kl, kr) = match gap_col {
                    Some(s) if in_cut(ri) => {
                        if dress.is_some() {
                            continue;
                        }
                        (k + seam_shift[s], k)
                    }
                    _ => (k, k),
                };
                let a = vid(kl, ci, ri);
                let b = vid(kr, ci + 1, ri);
                let cc = vid(kr, ci + 1, ri + 1);
                let d = vid(kl, ci, ri + 1);
                faces.push([a, b, cc]);
                faces.push([a, cc, d]);
            }
        }
        if k == 0 {
            sheet_faces = faces.len();
        }
    }
    let mesh = SurfaceMesh {
        vertices,
        faces,
        sheets,
        columns: nx,
        rows: ny,
    };
    let sheet_area: f64 = mesh.faces[..sheet_faces]
        .iter()
        .map(|f| triangle_area(&mesh.vertices[f[0]], &mesh.vertices[f[1]], &mesh.vertices[f[2]]))
        .sum();
    let report = MeshReport {
        vertices: mesh.vertices.len(),
        faces: mesh.faces.len(),
        sheets,
        sphere_defect: mesh.sphere_defect(),
        order_three_defect: dress.is_none().then(|| mesh.order_three_defect()),
        seam_defect,
        seam_shift,
        iwasawa_residual,
        iwasawa_unitarity,
        sheet_area,
        area: dress.is_none().then_some(1.5 * sheet_area),
        dressed: dress.is_some(),
    };
    Ok((mesh, report))
}

/// Stereographic projection of the unit sphere in `R^4` from `(0, 0, 0, -1)`
/// to `R^3`: `(v0, v1, v2) / (1 + v3)`.
pub fn stereographic(v: &[f64; 4]) -> [f64; 3] {
    let d = 1.0 + v[3];
    [v[0] / d, v[1] / d, v[2] / d]
}

/// Rotation of `R^4` realizing `v -> A v B^{-1}` on `SU(2)`; used in tests.
pub fn isometry_matrix(a: &Mat2, b: &Mat2) -> Matrix4<f64> {
    let bi = b.adjoint();
    let basis = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let mut m = Matrix4::zeros();
    for (j, e) in basis.iter().enumerate() {
        let f = linalg::s3_to_su2([c(e[0], e[1]), c(e[2], e[3])]);
        let img = to_r4(&(a * f * bi));
        for i in 0..4 {
            m[(i, j)] = img[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gluing_frame_inverse_and_determinant() {
        for z in [c(0.3, -0.2), c(-1.0, 0.5), c(1e-3, 0.0)] {
            let g = GluingFrame::new(z);
            let p = g.t_from_s() * g.s_from_t().unwrap();
            assert!(linalg::dist(&p, &linalg::identity()) < 1e-13);
            assert!((g.determinant() - z).norm() < 1e-15);
        }
        assert!(GluingFrame::new(c(0.0, 0.0)).s_from_t().is_err());
    }

    #[test]
    fn lambda_frame_parity() {
        let t = c(0.4, 0.7);
        let j = Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0));
        let lhs = GluingFrame::lambda_frame(-t);
        let rhs = j * GluingFrame::lambda_frame(t) * c(0.0, 1.0);
        assert!(linalg::dist(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn invariant_form_of_conjugated_unitaries() {
        let g = Mat2::new(c(1.2, 0.1), c(0.3, -0.5), c(0.0, 0.2), c(0.9, 0.0));
        let g = g / g.determinant().sqrt();
        let u1 = linalg::s3_to_su2([c(0.6, 0.0), c(0.0, 0.8)]);
        let u2 = linalg::s3_to_su2([c(0.0, 0.6), c(0.48, 0.64)]);
        let gi = g.try_inverse().unwrap();
        let gens = [g * u1 * gi, g * u2 * gi];
        let (h, defect) = invariant_hermitian_form(&gens).unwrap();
        assert!(defect < 1e-14);
        for m in gens {
            assert!(linalg::dist(&(m.adjoint() * h * m), &h) < 1e-13);
        }
        assert!((h.determinant() - 1.0).norm() < 1e-13);
    }

    #[test]
    fn graded_points_are_monotone_and_hit_ends() {
        for t in [(true, true), (true, false), (false, true)] {
            let p = graded(1.0, 2.0, 8, t);
            assert_eq!(p.len(), 9);
            assert_eq!(p[0], 1.0);
            assert!((p[8] - 2.0).abs() < 1e-15);
            assert!(p.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn triangle_area_in_r4() {
        let a = triangle_area(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 2.0]);
        assert!((a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn isometry_matrix_is_orthogonal() {
        let a = linalg::s3_to_su2([c(0.6, 0.0), c(0.0, 0.8)]);
        let b = linalg::s3_to_su2([c(0.0, 0.6), c(0.48, 0.64)]);
        let m = isometry_matrix(&a, &b);
        assert!((m.transpose() * m - Matrix4::identity()).abs().max() < 1e-14);
    }
}
