//! Deterministic numerical kernels: adaptive quadrature on finite and
//! unbounded intervals, monotone inversion, Hermite tables and compensated
//! summation. Everything here is pure and reentrant.

mod hermite;
mod quadrature;
mod roots;
mod summation;

pub use hermite::HermiteTable;
pub(crate) use hermite::gauss5;
pub use quadrature::{
    integrate, integrate_line, integrate_with_breaks, try_integrate, try_integrate_line, try_integrate_lower,
    try_integrate_upper, try_integrate_with_breaks, QuadResult, QuadratureSpec,
};
pub use roots::invert_monotone;
pub use summation::{checked_sum, compensated_mean, compensated_sum, sample_variance, NeumaierSum};
