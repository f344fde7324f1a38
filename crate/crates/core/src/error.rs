use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested too close to a pole of a meromorphic quantity.
    #[error("evaluation at {at} lies within {radius} of the pole lattice")]
    Pole { at: Complex64, radius: f64 },

    /// Input lies on a locus where the construction does not exist.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Input lies on a forbidden locus of the spectral data.
    #[error("forbidden value: {0}")]
    Forbidden(String),

    /// A transport path comes closer to a puncture than allowed.
    #[error("path clearance {clearance:.3e} below required {required:.3e}")]
    Clearance { clearance: f64, required: f64 },

    /// The adaptive integrator could not keep the step size above the floor.
    #[error("step size underflow at s = {s:.6} (h = {h:.3e})")]
    StepUnderflow { s: f64, h: f64 },

    /// A representation is too close to reducible for trace criteria to apply.
    #[error("representation is reducible: commutator distance to ±Id is {0:.3e}")]
    Reducible(f64),

    /// An iteration failed to reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A converged root failed a post-hoc admissibility check.
    #[error("root rejected: {0}")]
    Rejected(String),

    /// A solver failure at a specific collocation node.
    #[error("node {index}: {source}")]
    AtNode {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Invalid configuration or arguments.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
