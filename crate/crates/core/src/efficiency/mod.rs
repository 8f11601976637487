//! Local minimax variance `R_S(x,x)`, the bound `ρ_*(S) = ∫ R_S(x,x) ν(dx)`,
//! the functions `H`, `G`, `M`, `m` behind the martingale representation of
//! the unbiased estimators, condition screens, and Monte Carlo risk.

mod conditions;
mod identities;
mod nu;
mod risk;

pub use conditions::{check_q2, check_q2_with, check_q3, check_q3_with, ConditionReport};
pub use identities::{
    coeff_c, coeff_d, g_func, h_func, m_closed, m_direct, m_func, m_func_combined, ode_residual,
    pathwise_representation_check, representation_terms, RepresentationTerms,
};
pub use nu::NuMeasure;
pub use risk::{empirical_risk, empirical_risk_paired, RiskProvenance, RiskReport};

use crate::error::Result;
use crate::model::{DiffusionModel, InvariantLaw};
use crate::numerics::{try_integrate_line, QuadratureSpec};

/// `F_S(x ∧ y) - F_S(x) F_S(y)`.
pub fn influence_numerator(model: &DiffusionModel, x: f64, y: f64) -> Result<f64> {
    Ok(model.law()?.influence_numerator(x, y))
}

/// `influence / (σ² f_S)` at `y`; zero wherever the numerator vanishes.
#[inline]
pub(crate) fn influence_ratio(law: &InvariantLaw, model: &DiffusionModel, x: f64, y: f64) -> f64 {
    let num = law.influence_numerator(x, y);
    if num == 0.0 {
        return 0.0;
    }
    let den = model.diffusion_sq(y) * law.density(y);
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `R_S(x,x) = 4 ∫ (F(x∧y) - F(x)F(y))² / (σ²(y) f_S(y)) dy`.
pub fn local_variance(model: &DiffusionModel, x: f64) -> Result<f64> {
    let law = model.law()?;
    local_variance_with(&law, model, x, model.quadrature())
}

pub(crate) fn local_variance_with(law: &InvariantLaw, model: &DiffusionModel, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    let q = try_integrate_line(
        |y| {
            let num = law.influence_numerator(x, y);
            if num == 0.0 {
                return Ok(0.0);
            }
            let r = influence_ratio(law, model, x, y);
            Ok(num * r)
        },
        spec,
    )?;
    Ok(4.0 * q.value)
}

/// `ρ_*(S) = ∫ R_S(x,x) ν(dx)`.
pub fn efficiency_bound(model: &DiffusionModel, nu: &NuMeasure) -> Result<f64> {
    let law = model.law()?;
    let inner = *model.quadrature();
    // The outer integrand carries the inner quadrature error; ask less of the outer rule.
    let outer = inner.with_tolerance(inner.abs_tol * 100.0, inner.rel_tol * 100.0);
    nu.integrate(|x| local_variance_with(&law, model, x, &inner), &outer)
}
