//! Entanglement witnesses from statistical speeds.
//!
//! Bounds on the Fisher-information speed of separable states for
//! collective probes, k-partite depth classification, and Monte Carlo
//! estimation of the speed from Kullback-Leibler divergences of measured
//! frequencies.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod klmc;
pub mod optim;
pub mod prob;
pub mod qsim;
pub mod sep;
pub mod witness;

pub use error::{Error, Result};
