mod common;

use std::f64::consts::PI;

use common::c;
use lawson_spectral::theta::{self, ThetaFn};
use lawson_spectral::Complex64;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Complex64> {
    (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b)| c(a, b))
}

/// Reference value from the product formula
/// `theta_1(z) = 2 q^{1/4} sin(pi z) prod (1 - q^{2n})(1 - 2 q^{2n} cos(2 pi z) + q^{4n})`.
fn theta1_product(z: Complex64) -> Complex64 {
    let q = (-PI).exp();
    let mut p = 2.0 * q.powf(0.25) * (PI * z).sin();
    let cos2 = (2.0 * PI * z).cos();
    for n in 1..40 {
        let q2n = q.powi(2 * n);
        p *= (1.0 - q2n) * (1.0 - 2.0 * q2n * cos2 + q2n * q2n);
    }
    p
}

#[test]
fn series_matches_product_formula() {
    let th = ThetaFn::default();
    for z in [c(0.1, 0.2), c(-0.7, 0.4), c(0.33, -0.9), c(1.2, 0.05)] {
        let got = th.theta1(z);
        let want = theta1_product(z);
        assert!((got - want).norm() < 1e-13 * want.norm().max(1.0), "{z}: {got} vs {want}");
    }
}

#[test]
fn zero_set_is_the_lattice() {
    let th = ThetaFn::default();
    for z in [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)] {
        assert!(th.theta(z).norm() < 1e-13, "theta({z}) = {}", th.theta(z));
        // simple zeros
        assert!(th.theta_prime(z).norm() > 0.1);
    }
    // the winding number around one cell is one
    let suite = theta::invariant_suite(&th, &[c(0.3, 0.4)]);
    assert!(suite.zero_count < 1e-12, "{}", suite.zero_count);
}

#[test]
fn parity_relation() {
    let th = ThetaFn::default();
    let z = c(0.27, -0.41);
    assert!((th.theta(-z) - th.theta(z + c(0.0, 1.0))).norm() < 1e-13);
}

#[test]
fn section_satisfies_its_dbar_equation() {
    let th = ThetaFn::default();
    let x = c(0.17, 0.08);
    let h = 1e-5;
    for z in [c(0.3, 0.4), c(-0.6, 0.7), c(1.25, -0.35)] {
        let s = |w| th.bundle_section(x, w, 1e-3).unwrap();
        let dx = (s(z + h) - s(z - h)) / (2.0 * h);
        let dy = (s(z + c(0.0, h)) - s(z - c(0.0, h))) / (2.0 * h);
        let dbar = 0.5 * (dx + c(0.0, 1.0) * dy);
        let r = (dbar - PI * x * s(z)).norm() / s(z).norm().max(1.0);
        assert!(r < 1e-6, "{z}: {r:e}");
    }
}

#[test]
fn section_rejects_poles() {
    let th = ThetaFn::default();
    assert!(th.bundle_section(c(0.1, 0.1), c(1.0, 1e-5), 1e-3).is_err());
}

#[test]
fn too_few_terms_fail_the_suite() {
    let pts: Vec<Complex64> = (0..20).map(|k| c(0.05 * k as f64 - 0.5, 0.3)).collect();
    let good = theta::invariant_suite(&ThetaFn::default(), &pts);
    assert!(good.failures(1e-12).is_empty(), "{good:?}");
    let bad = theta::invariant_suite(&ThetaFn::new(2), &pts);
    assert!(!bad.failures(1e-12).is_empty(), "{bad:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn real_period(z in point()) {
        let th = ThetaFn::default();
        let a = th.theta(z + 1.0);
        let b = th.theta(z);
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn imaginary_quasi_period(z in point()) {
        let th = ThetaFn::default();
        let a = th.theta(z + c(0.0, 1.0));
        let b = th.theta(z) * theta::quasi_period_factor(z);
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn derivative_is_periodic_and_matches_differences(z in point()) {
        let th = ThetaFn::default();
        let d = th.theta_prime(z);
        prop_assert!((th.theta_prime(z + 1.0) - d).norm() <= 1e-12 * d.norm().max(1.0));
        let h = 1e-5;
        let fd = (th.theta(z + h) - th.theta(z - h)) / (2.0 * h);
        prop_assert!((fd - d).norm() <= 1e-7 * d.norm().max(1.0));
    }

    #[test]
    fn section_is_doubly_periodic(
        z in (0.1f64..0.9, 0.1f64..0.9).prop_map(|(a, b)| c(a, b)),
        x in (-0.5f64..0.5, -0.5f64..0.5).prop_map(|(a, b)| c(a, b)),
    ) {
        let th = ThetaFn::default();
        let s = th.bundle_section(x, z, 1e-3).unwrap();
        for w in [z + 1.0, z + c(0.0, 1.0), z - c(1.0, 1.0)] {
            let t = th.bundle_section(x, w, 1e-3).unwrap();
            prop_assert!((t - s).norm() <= 1e-11 * s.norm().max(1.0));
        }
    }
}
