mod common;

use std::f64::consts::PI;

use common::{c, lawson, lawson_data, solve_fresh, solver};
use lawson_spectral::spectral::{self, SpectralData, SpectralOptions, FORBIDDEN_MARGIN};
use lawson_spectral::Complex64;
use proptest::prelude::*;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

#[test]
fn solved_data_is_admissible() {
    let out = lawson();
    let d = &out.data;
    assert!(out.report.reality_residual < 1e-10);
    assert!(out.report.closing_residual < 1e-10);
    d.validate().unwrap();
    assert!(d.x1().norm() > 0.0);
    assert!(d.forbidden_distance() > FORBIDDEN_MARGIN);
    assert!(d.branch_clearance() > 1e-3);
    assert!(spectral::area_complex(d).im.abs() < 1e-6);
    assert!(max_abs(&spectral::closing_residual(d)) < 1e-10);
}

#[test]
fn doubled_collocation_residual_is_small() {
    // at this truncation the interpolation error between nodes is ~1e-5, far
    // above the solve tolerance; see the README for the convergence table
    let r = solver().reality_residual(lawson_data(), 240).unwrap();
    assert!(max_abs(&r) < 1e-5, "{}", max_abs(&r));
}

#[test]
fn rerun_from_solution_stops_at_once() {
    let opts = SpectralOptions {
        n_points: 120,
        tol: 1e-10,
        ..SpectralOptions::default()
    };
    let out = solver().solve(lawson_data(), &opts).unwrap();
    assert!(out.report.converged);
    assert_eq!(out.report.iterations, 1);
    assert_eq!(&out.data, lawson_data());
}

#[test]
fn a_is_determined_by_x() {
    let d = lawson_data();
    let (fit, _) = solver().fit_a(d.x_coeffs.clone(), 120).unwrap();
    for (p, q) in fit.a_coeffs.iter().zip(&d.a_coeffs) {
        assert!((p - q).norm() < 1e-6, "{p} vs {q}");
    }
}

#[test]
fn residual_is_sensitive_to_the_pole_coefficient() {
    let mut d = lawson_data().clone();
    d.a_coeffs[0] += 1e-3;
    let r = solver().reality_residual(&d, 120).unwrap();
    assert!(max_abs(&r) > 1e-4, "{}", max_abs(&r));
}

#[test]
fn truncation_stability() {
    let coarse = solve_fresh(21, 88, 1e-10);
    assert!(coarse.report.converged);
    let fine = lawson_data();
    for k in 0..4 {
        let dx = (coarse.data.x_coeffs[k] - fine.x_coeffs[k]).norm();
        let da = (coarse.data.a_coeffs[k] - fine.a_coeffs[k]).norm();
        assert!(dx < 1e-3 && da < 1e-3, "k = {k}: {dx:e} {da:e}");
    }
    let rel = (spectral::area(&coarse.data) - spectral::area(fine)).abs() / spectral::area(fine);
    assert!(rel < 1e-3, "{rel}");
}

#[test]
fn structural_guards() {
    assert!(SpectralData::new(vec![], vec![c(0.0, 0.0); 2]).is_err());
    assert!(SpectralData::new(vec![c(0.1, 0.0)], vec![c(0.0, 0.0); 2]).is_err());
    let opts = SpectralOptions {
        n_points: 18,
        ..SpectralOptions::default()
    };
    let d = SpectralData::new(vec![c(0.25, 0.25)], vec![c(0.2, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert!(solver().solve(&d, &opts).is_err());
}

#[test]
fn area_examples() {
    let mut d = SpectralData::new(vec![c(0.5, 0.0)], vec![c(0.0, 0.0); 3]).unwrap();
    d.a_coeffs[0] = c(2.0 / (12.0 * PI), 0.0);
    assert!(spectral::area(&d).abs() < 1e-14);
    d.a_coeffs[0] = c(2.0 / (6.0 * PI), 0.0);
    assert!((spectral::area(&d) - 2.0 * PI).abs() < 1e-13);
    // the zero-coupling value
    d.a_coeffs[0] = c(0.0, 0.0);
    assert!((spectral::area(&d) + 2.0 * PI).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn series_are_odd(
        x in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
        t in (0.1f64..1.0, -3.2f64..3.2),
    ) {
        let xs: Vec<Complex64> = x.iter().map(|&(a, b)| c(a, b)).collect();
        let a: Vec<Complex64> = (0..xs.len() + 2).map(|k| c(0.1 * k as f64, -0.05)).collect();
        let d = SpectralData::new(xs, a).unwrap();
        let t = Complex64::from_polar(t.0, t.1);
        prop_assert!((d.x_at(-t) + d.x_at(t)).norm() < 1e-14);
        prop_assert!((d.a_at(-t) + d.a_at(t)).norm() < 1e-12 * d.a_at(t).norm().max(1.0));
    }

    #[test]
    fn mean_curvature_is_real_and_antisymmetric(p in 0.1f64..3.0, q in -3.0f64..-0.1) {
        let s = spectral::SymConfig::new(Complex64::from_polar(1.0, p), Complex64::from_polar(1.0, q)).unwrap();
        let h = spectral::mean_curvature(&s).unwrap();
        prop_assert!(h.im.abs() < 1e-12 * h.norm().max(1.0));
        let r = spectral::SymConfig::new(s.lambda_2, s.lambda_1).unwrap();
        prop_assert!((spectral::mean_curvature(&r).unwrap() + h).norm() < 1e-12 * h.norm().max(1.0));
    }

    #[test]
    fn projection_clears_the_forbidden_values(
        x1 in (0.05f64..0.5, 0.05f64..0.5), off in (-5e-4f64..5e-4, -5e-4f64..5e-4), sign in prop_oneof![Just(-1.0), Just(1.0)],
    ) {
        let x1 = c(x1.0, x1.1);
        let p = c(sign / (12.0 * PI), 0.0) + c(off.0, off.1);
        let mut d = SpectralData::new(vec![x1], vec![p / x1, c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        prop_assert!(d.project_off_forbidden().is_some());
        prop_assert!(d.forbidden_distance() >= FORBIDDEN_MARGIN * (1.0 - 1e-9));
    }
}
