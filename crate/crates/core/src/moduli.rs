//! Coordinates on the Jacobian of the square torus and on the affine bundle of
//! flat line-bundle connections `d + pi a dz - pi x dzbar`.
//!
//! The holomorphic structure depends on `x` modulo the lattice
//! `L' = (1/2)Z + (i/2)Z`. Shifts of `x` act on `a` through the coupled action
//! `(x, a) ~ (x + 1/2, a + 1/2) ~ (x + i/2, a - i/2)`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Snap tolerance for the half-open cell boundary.
const EDGE_EPS: f64 = 1e-13;

/// Canonical representative of `x` modulo `L'` in `[0, 1/2) x [0, 1/2) i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianCoord {
    x: Complex64,
}

impl JacobianCoord {
    pub fn x(&self) -> Complex64 {
        self.x
    }
}

/// A flat connection `d + pi a dz - pi x dzbar` on a line bundle over the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineConnCoord {
    pub x: Complex64,
    pub a: Complex64,
}

impl AffineConnCoord {
    pub fn new(x: Complex64, a: Complex64) -> Self {
        Self { x, a }
    }

    /// Apply the coupled lattice action `m (1/2, 1/2) + n (i/2, -i/2)`.
    pub fn translate(&self, m: i64, n: i64) -> Self {
        let m = m as f64 * 0.5;
        let n = n as f64 * 0.5;
        Self {
            x: self.x + Complex64::new(m, n),
            a: self.a + Complex64::new(m, -n),
        }
    }
}

/// Point of the moduli line: the class of `{x, -x}` modulo `L'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliClass {
    pub representative: JacobianCoord,
}

fn reduce_component(v: f64) -> f64 {
    let r = v - (2.0 * v).floor() * 0.5;
    if !(EDGE_EPS..0.5 - EDGE_EPS).contains(&r) {
        0.0
    } else {
        r
    }
}

/// Reduce `x` modulo `L'` into the half-open cell; ties go to 0.
pub fn reduce(x: Complex64) -> JacobianCoord {
    JacobianCoord {
        x: Complex64::new(reduce_component(x.re), reduce_component(x.im)),
    }
}

/// Distance of `x` to the lattice `L'`.
pub fn lattice_distance(x: Complex64) -> f64 {
    let d = x - Complex64::new((2.0 * x.re).round() * 0.5, (2.0 * x.im).round() * 0.5);
    d.norm()
}

/// True if `x` lies within `tol` of `L'` (the trivial line bundle).
pub fn is_trivial_bundle(x: Complex64, tol: f64) -> bool {
    lattice_distance(x) < tol
}

/// Distance between the coupled-lattice classes of `p` and `q`.
///
/// The minimum is taken over translates of `p` near the one that best matches
/// `q.x`; the metric is Euclidean on `(x, a)`.
pub fn class_distance(p: &AffineConnCoord, q: &AffineConnCoord) -> f64 {
    let dx = q.x - p.x;
    let m0 = (2.0 * dx.re).round() as i64;
    let n0 = (2.0 * dx.im).round() as i64;
    let mut best = f64::INFINITY;
    for m in m0 - 1..=m0 + 1 {
        for n in n0 - 1..=n0 + 1 {
            let t = p.translate(m, n);
            let d = ((q.x - t.x).norm_sqr() + (q.a - t.a).norm_sqr()).sqrt();
            best = best.min(d);
        }
    }
    best
}

/// True iff some coupled-lattice translate of `p` matches `q` within `tol`.
pub fn class_equal(p: &AffineConnCoord, q: &AffineConnCoord, tol: f64) -> bool {
    let dx = q.x - p.x;
    let m0 = (2.0 * dx.re).round() as i64;
    let n0 = (2.0 * dx.im).round() as i64;
    for m in m0 - 1..=m0 + 1 {
        for n in n0 - 1..=n0 + 1 {
            let t = p.translate(m, n);
            if (q.x - t.x).norm() <= tol && (q.a - t.a).norm() <= tol {
                return true;
            }
        }
    }
    false
}

fn lex_cmp(a: Complex64, b: Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// The even 2:1 map to the moduli line, `x` and `-x` have the same image.
pub fn pi_project(x: JacobianCoord) -> ModuliClass {
    let p = reduce(x.x);
    let m = reduce(-x.x);
    let representative = if lex_cmp(p.x, m.x) == Ordering::Greater { m } else { p };
    ModuliClass { representative }
}

/// The four 2-torsion points of `C / L'`: the branch points of [`pi_project`].
pub fn branch_points() -> [Complex64; 4] {
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.25, 0.0),
        Complex64::new(0.0, 0.25),
        Complex64::new(0.25, 0.25),
    ]
}

/// True if `x` and `-x` agree modulo `L'` within `tol`.
pub fn is_branch_point(x: Complex64, tol: f64) -> bool {
    lattice_distance(2.0 * x) < 2.0 * tol
}

/// Convert the coefficient `t` of `dbar_0 + t dzbar` into the coordinate `x` of
/// `dbar_0 - pi x dzbar`.
pub fn normalize_trivialization(t_coeff: Complex64) -> Complex64 {
    t_coeff / (-PI)
}

/// Inverse of [`normalize_trivialization`].
pub fn denormalize_trivialization(x: Complex64) -> Complex64 {
    x * (-PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reduce_examples() {
        let r = reduce(c(0.6, 0.7)).x();
        assert!((r - c(0.1, 0.2)).norm() < 1e-14);
        assert_eq!(reduce(c(0.0, 0.0)).x(), c(0.0, 0.0));
        assert_eq!(reduce(c(-0.5, 0.5)).x(), c(0.0, 0.0));
    }

    #[test]
    fn coupled_action() {
        let p = AffineConnCoord::new(c(0.1, 0.2), c(-0.3, 0.05));
        let q = AffineConnCoord::new(p.x + 0.5, p.a + 0.5);
        assert!(class_equal(&p, &q, 1e-12));
        let q = AffineConnCoord::new(p.x + c(0.0, 0.5), p.a - c(0.0, 0.5));
        assert!(class_equal(&p, &q, 1e-12));
        let q = AffineConnCoord::new(p.x, p.a + 0.3);
        assert!(!class_equal(&p, &q, 1e-9));
        // shifting x alone is not the coupled action
        let q = AffineConnCoord::new(p.x + 0.5, p.a);
        assert!(!class_equal(&p, &q, 1e-9));
    }

    #[test]
    fn branch_locus() {
        for b in branch_points() {
            assert!(is_branch_point(b, 1e-12));
            assert_eq!(pi_project(reduce(b)), pi_project(reduce(-b)));
        }
        assert!(!is_branch_point(c(0.1, 0.2), 1e-6));
    }

    #[test]
    fn trivialization_factor() {
        assert_eq!(normalize_trivialization(c(0.0, 0.0)), c(0.0, 0.0));
        let x = normalize_trivialization(-PI * c(0.1, 0.2));
        assert!((x - c(0.1, 0.2)).norm() < 1e-15);
    }
}
