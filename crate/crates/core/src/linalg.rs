//! Small helpers for 2x2 complex matrices.

use nalgebra::Matrix2;
use num_complex::Complex64;

pub type Mat2 = Matrix2<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity() -> Mat2 {
    Mat2::identity()
}

pub fn diag(a: Complex64, b: Complex64) -> Mat2 {
    Mat2::new(a, c(0.0, 0.0), c(0.0, 0.0), b)
}

/// Max-norm of the entries.
pub fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn dist(a: &Mat2, b: &Mat2) -> f64 {
    max_abs(&(a - b))
}

/// `|| m m^* - Id ||_max`.
pub fn unitarity_error(m: &Mat2) -> f64 {
    dist(&(m * m.adjoint()), &identity())
}

/// Inverse of a matrix with determinant one (no division).
pub fn sl2_inverse(m: &Mat2) -> Mat2 {
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// Positive square root of a Hermitian positive definite 2x2 matrix.
pub fn hermitian_sqrt(h: &Mat2) -> Mat2 {
    // For 2x2: sqrt(H) = (H + sqrt(det H) Id) / sqrt(tr H + 2 sqrt(det H)).
    let det = h.determinant().re.max(0.0);
    let s = det.sqrt();
    let t = (h.trace().re + 2.0 * s).sqrt();
    (h + identity() * c(s, 0.0)) / c(t, 0.0)
}

/// Lower-triangular Cholesky factor `L` with `L L^* = h`.
pub fn cholesky_lower(h: &Mat2) -> Option<Mat2> {
    let a = h[(0, 0)].re;
    if a <= 0.0 {
        return None;
    }
    let l00 = a.sqrt();
    let l10 = h[(1, 0)] / l00;
    let d = h[(1, 1)].re - l10.norm_sqr();
    if d <= 0.0 {
        return None;
    }
    Some(Mat2::new(c(l00, 0.0), c(0.0, 0.0), l10, c(d.sqrt(), 0.0)))
}

/// Hermitian part `(m + m^*)/2`.
pub fn hermitian_part(m: &Mat2) -> Mat2 {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Orthogonal projection onto the complex line spanned by `v`.
pub fn line_projection(v: [Complex64; 2]) -> Mat2 {
    let n = v[0].norm_sqr() + v[1].norm_sqr();
    let m = Mat2::new(
        v[0] * v[0].conj(),
        v[0] * v[1].conj(),
        v[1] * v[0].conj(),
        v[1] * v[1].conj(),
    );
    m / c(n, 0.0)
}

/// Eigenvector of `m` for the eigenvalue `mu`.
pub fn eigenvector(m: &Mat2, mu: Complex64) -> [Complex64; 2] {
    let a = m[(0, 0)] - mu;
    let b = m[(0, 1)];
    let cc = m[(1, 0)];
    let d = m[(1, 1)] - mu;
    // rows of m - mu are parallel; use the larger one
    if a.norm() + b.norm() >= cc.norm() + d.norm() {
        if a.norm() + b.norm() == 0.0 {
            return [c(1.0, 0.0), c(0.0, 0.0)];
        }
        [b, -a]
    } else {
        [d, -cc]
    }
}

/// Eigenvalues of a 2x2 matrix.
pub fn eigenvalues(m: &Mat2) -> (Complex64, Complex64) {
    let tr = m.trace();
    let det = m.determinant();
    let disc = (tr * tr - 4.0 * det).sqrt();
    ((tr + disc) / 2.0, (tr - disc) / 2.0)
}

/// Identify an SU(2) matrix `[[a, -conj b], [b, conj a]]` with `(a, b)` on S^3.
pub fn su2_to_s3(m: &Mat2) -> [Complex64; 2] {
    [m[(0, 0)], m[(1, 0)]]
}

pub fn s3_to_su2(p: [Complex64; 2]) -> Mat2 {
    Mat2::new(p[0], -p[1].conj(), p[1], p[0].conj())
}
