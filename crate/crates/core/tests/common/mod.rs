//! Shared fixtures: the solved data and its reconstruction are expensive, so
//! each test binary computes them once.
#![allow(dead_code)]

use std::sync::OnceLock;

use lawson_spectral::reconstruct::{ReconstructOptions, Reconstruction};
use lawson_spectral::spectral::{SolveOutcome, SpectralData, SpectralOptions, SpectralSolver};
use lawson_spectral::unitarizer::AuSolver;
use lawson_spectral::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Fresh solve at truncation `n` with `n_points` nodes from the standard guess.
pub fn solve_fresh(n: usize, n_points: usize, tol: f64) -> SolveOutcome {
    let solver = SpectralSolver::new(AuSolver::default());
    let guess = solver.initial_guess(n, c(0.25, 0.25), n_points).expect("initial guess");
    let opts = SpectralOptions {
        n_points,
        tol,
        max_iter: 30,
        ..SpectralOptions::default()
    };
    solver.solve(&guess, &opts).expect("solve")
}

/// Converged data at N = 29 on 120 nodes.
pub fn lawson() -> &'static SolveOutcome {
    static CELL: OnceLock<SolveOutcome> = OnceLock::new();
    CELL.get_or_init(|| {
        let out = solve_fresh(29, 120, 1e-10);
        assert!(out.report.converged, "{:?}", out.report.residual_history);
        out
    })
}

pub fn lawson_data() -> &'static SpectralData {
    &lawson().data
}

pub fn solver() -> &'static SpectralSolver {
    static CELL: OnceLock<SpectralSolver> = OnceLock::new();
    CELL.get_or_init(|| SpectralSolver::new(AuSolver::default()))
}

pub fn reconstruction() -> &'static Reconstruction {
    static CELL: OnceLock<Reconstruction> = OnceLock::new();
    CELL.get_or_init(|| {
        Reconstruction::new(solver(), lawson_data(), ReconstructOptions::default()).expect("reconstruction")
    })
}
