//! Double-quadrature screens of the moment conditions on `H_x` and `G_x`.
//!
//! For each outer `x` the inner function of `y` is tabulated once on a
//! uniform grid with a knot at `x`, and `E_S F_x(ξ)²` is summed cell by cell
//! over the tabulated support of the invariant law.
//! Divergence is only detected through the tail-doubling rule: a slowly
//! diverging integral can pass.

use serde::Serialize;

use super::{influence_ratio, NuMeasure};
use crate::error::Error;
use crate::estimators::UnbiasedKernel;
use crate::model::{DiffusionModel, InvariantLaw};
use crate::numerics::{HermiteTable, QuadratureSpec};

const CELL: f64 = 1.0 / 128.0;
const REACH: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub holds: bool,
    /// `∫ E_S F_x(ξ)² ν(dx)` when finite.
    pub value: Option<f64>,
    pub detail: Option<String>,
}

/// Tolerances of the screens; looser than the truth computations.
fn screen_spec(model: &DiffusionModel) -> QuadratureSpec {
    model.quadrature().with_tolerance(1e-7, 1e-7).with_tail_tol(1e-10)
}

fn screen<F>(name: &str, model: &DiffusionModel, nu: &NuMeasure, spec: &QuadratureSpec, integrand: F) -> ConditionReport
where
    F: Fn(&InvariantLaw, f64, f64) -> f64,
{
    let outcome = model.law().and_then(|law| {
        let (lo, hi) = effective_window(&law);
        nu.integrate(
            |x| {
                // Anchor at x, where the integrand has its kink, then shift to ∫_0^y.
                let table = HermiteTable::anchored(|v| integrand(&law, x, v), x.clamp(lo, hi), lo, hi, CELL);
                let at_zero = table.eval(0.0);
                let v = table.integrate_cells(|y, t| (t - at_zero).powi(2) * law.density(y));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { at: x, value: v })
                }
            },
            spec,
        )
    });
    match outcome {
        Ok(v) if v.is_finite() => ConditionReport { name: name.into(), holds: true, value: Some(v), detail: None },
        Ok(v) => ConditionReport { name: name.into(), holds: false, value: None, detail: Some(format!("non-finite value {v}")) },
        Err(e) => ConditionReport { name: name.into(), holds: false, value: None, detail: Some(e.to_string()) },
    }
}

/// Part of the support where the density is above `1e-60` of its peak;
/// the rest cannot move `E_S F(ξ)²` unless `F` grows faster than `e^{138}`.
fn effective_window(law: &InvariantLaw) -> (f64, f64) {
    let (lo, hi) = law.support();
    let (lo, hi) = (lo.max(-REACH), hi.min(REACH));
    let n = 4096;
    let ys: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let dens: Vec<f64> = ys.iter().map(|&y| law.density(y)).collect();
    let floor = dens.iter().cloned().fold(0.0, f64::max) * 1e-60;
    let first = dens.iter().position(|&d| d > floor).unwrap_or(0).saturating_sub(1);
    let last = (dens.iter().rposition(|&d| d > floor).unwrap_or(n) + 1).min(n);
    (ys[first], ys[last])
}

/// `∫ E_S H_x(ξ)² ν(dx) < ∞`.
pub fn check_q2(model: &DiffusionModel, nu: &NuMeasure) -> ConditionReport {
    check_q2_with(model, nu, &screen_spec(model))
}

pub fn check_q2_with(model: &DiffusionModel, nu: &NuMeasure, spec: &QuadratureSpec) -> ConditionReport {
    screen("Q2", model, nu, spec, |law, x, v| 2.0 * influence_ratio(law, model, x, v))
}

/// `∫ E_S G_x(ξ)² ν(dx) < ∞`.
pub fn check_q3(kernel: &UnbiasedKernel, nu: &NuMeasure) -> ConditionReport {
    check_q3_with(kernel, nu, &screen_spec(kernel.model()))
}

pub fn check_q3_with(kernel: &UnbiasedKernel, nu: &NuMeasure, spec: &QuadratureSpec) -> ConditionReport {
    screen("Q3", kernel.model(), nu, spec, |_, x, v| {
        if v < x {
            2.0 * kernel.k(x, v).unwrap_or(f64::NAN) * kernel.weight().h(v)
        } else {
            0.0
        }
    })
}
