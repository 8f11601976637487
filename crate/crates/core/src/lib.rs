//! Estimation of the invariant distribution function of an ergodic scalar
//! diffusion `dX = S(X) dt + σ(X) dW`.
//!
//! The crate computes the invariant law and the asymptotic minimax bound by
//! quadrature, simulates paths with Euler–Maruyama, implements the empirical
//! distribution function and the unbiased estimator family parameterized by a
//! weight function `h`, and checks their Monte Carlo risk against the bound.

// `!(v > 0.0)` is deliberate throughout: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod efficiency;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod simulate;

pub use error::{Error, Result};
pub use estimators::{EstimatorSpec, PathEstimator, UnbiasedKernel, WeightFunction};
pub use model::{DiffusionModel, InvariantLaw, ModelSpec};
pub use simulate::{Path, SimConfig};
