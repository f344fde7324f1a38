//! Spectral-data construction of Lawson's genus two minimal surface in the 3-sphere.

// negated comparisons are used on purpose so that NaN counts as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod connection;
pub mod error;
pub mod export;
pub mod iwasawa;
pub mod linalg;
pub mod moduli;
pub mod monodromy;
pub mod ode;
pub mod reconstruct;
pub mod spectral;
pub mod theta;
pub mod unitarizer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
