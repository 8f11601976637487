//! Executable form of the martingale representation
//!
//! `√T(F̃_T(x) - F_S(x)) = [M(X_T) - M(X_0)]/√T - (1/√T) ∫ 2 infl(x, X_t)/(σ f_S)(X_t) dW_t`
//!
//! with `M = G + H`, `M' = m`, and `M'S + ½M''σ² = c_x`. The sign of the
//! stochastic integral follows from Itô's formula: `dM = c_x dt + mσ dW` and
//! `mσ - d_x = 2 infl/(σ f_S)`.

use serde::Serialize;

use super::influence_ratio;
use crate::error::{Error, Result};
use crate::estimators::{PathEstimator, UnbiasedKernel};
use crate::numerics::{try_integrate_lower, try_integrate_with_breaks, NeumaierSum, QuadratureSpec};
use crate::simulate::Path;

/// Tolerances for the representation functions, which are differenced twice.
fn tight(spec: &QuadratureSpec) -> QuadratureSpec {
    spec.with_tolerance(spec.abs_tol.min(1e-14), spec.rel_tol.min(1e-13))
}

/// `H_x(y) = 2 ∫_0^y (F(v∧x) - F(v)F(x)) / (σ²(v) f_S(v)) dv`.
pub fn h_func(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    let model = kernel.model();
    let law = model.law()?;
    let spec = tight(model.quadrature());
    Ok(try_integrate_with_breaks(|v| Ok(2.0 * influence_ratio(&law, model, x, v)), 0.0, y, &[x], &spec)?.value)
}

/// `G_x(y) = 2 ∫_0^y 1{v<x} K_x(v) h(v) dv`.
pub fn g_func(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    let spec = tight(kernel.model().quadrature());
    let h = |v: f64| if v < x { Ok(2.0 * kernel.k(x, v)? * kernel.weight().h(v)) } else { Ok(0.0) };
    Ok(try_integrate_with_breaks(h, 0.0, y, &[x], &spec)?.value)
}

/// `M_x(y) = G_x(y) + H_x(y)`, so `M_x(0) = 0`.
pub fn m_func(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    Ok(g_func(kernel, x, y)? + h_func(kernel, x, y)?)
}

/// `M_x(y)` as one quadrature of [`m_closed`] over `[0, y]`.
pub fn m_func_combined(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    let spec = tight(kernel.model().quadrature());
    Ok(try_integrate_with_breaks(|z| m_closed(kernel, x, z), 0.0, y, &[x], &spec)?.value)
}

/// `m(z) = 2·1{z<x} h(z) K_x(z) + 2 (F(x∧z) - F(x)F(z)) / (σ²(z) f_S(z))`.
pub fn m_closed(kernel: &UnbiasedKernel, x: f64, z: f64) -> Result<f64> {
    let model = kernel.model();
    let law = model.law()?;
    let f = law.density(z);
    if !(f > 0.0 && f.is_normal()) {
        return Err(Error::Tail { at: z, reason: format!("invariant density underflows ({f:e})") });
    }
    let first = if z < x { 2.0 * kernel.weight().h(z) * kernel.k(x, z)? } else { 0.0 };
    let num = law.influence_numerator(x, z);
    Ok(first + 2.0 * num / (model.diffusion_sq(z) * f))
}

/// `m(z) = 2/(f_S(z) σ²(z)) ∫_{-∞}^z c_x(v) f_S(v) dv`.
pub fn m_direct(kernel: &UnbiasedKernel, x: f64, z: f64) -> Result<f64> {
    let model = kernel.model();
    let law = model.law()?;
    let f = law.density(z);
    if !(f > 0.0 && f.is_normal()) {
        return Err(Error::Tail { at: z, reason: format!("invariant density underflows ({f:e})") });
    }
    let (lo, _) = law.support();
    let spec = tight(model.quadrature());
    let fx = law.cdf(x);
    let integrand = |v: f64| {
        if v < lo {
            return Ok(0.0);
        }
        Ok((kernel.compensator(x, v)? - fx) * law.density(v))
    };
    let q = try_integrate_lower(integrand, z, &[x], &spec)?;
    Ok(2.0 * q.value / (f * model.diffusion_sq(z)))
}

/// `c_x(y) = 1{y<x} K_x(y) [2hS + h'σ²](y) - F_S(x)`.
pub fn coeff_c(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    let law = kernel.model().law()?;
    kernel.c(&law, x, y)
}

/// `d_x(y) = 2·1{y<x} h(y) K_x(y) σ(y)`.
pub fn coeff_d(kernel: &UnbiasedKernel, x: f64, y: f64) -> Result<f64> {
    kernel.d(x, y)
}

/// `M'S + ½M''σ² - c_x` at `y`, with `M'` and `M''` by central differences of [`m_func`].
pub fn ode_residual(kernel: &UnbiasedKernel, x: f64, y: f64, step: f64) -> Result<f64> {
    let model = kernel.model();
    let (mm, m0, mp) = (m_func(kernel, x, y - step)?, m_func(kernel, x, y)?, m_func(kernel, x, y + step)?);
    let d1 = (mp - mm) / (2.0 * step);
    let d2 = (mp - 2.0 * m0 + mm) / (step * step);
    Ok(d1 * model.drift(y) + 0.5 * d2 * model.diffusion_sq(y) - coeff_c(kernel, x, y)?)
}

/// The three terms of the representation evaluated along one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepresentationTerms {
    /// `√T (F̃_T(x) - F_S(x))`
    pub lhs: f64,
    /// `[M(X_T) - M(X_0)] / √T`
    pub boundary: f64,
    /// `-(1/√T) Σ 2 infl(x, X_i)/(σ f_S)(X_i) ΔW_i`
    pub martingale: f64,
}

impl RepresentationTerms {
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.boundary - self.martingale).abs()
    }
}

pub fn representation_terms(path: &Path, kernel: &UnbiasedKernel, x: f64) -> Result<RepresentationTerms> {
    let dw = path
        .wiener_increments
        .as_ref()
        .ok_or_else(|| Error::Precondition("the representation check needs stored Wiener increments".into()))?;
    if dw.len() != path.steps() || dw.is_empty() {
        return Err(Error::Precondition(format!("{} increments for {} steps", dw.len(), path.steps())));
    }
    let model = kernel.model();
    let law = model.law()?;
    let root_t = path.horizon().sqrt();

    let est = kernel.curve(path, &[x])?[0];
    let lhs = root_t * (est - law.cdf(x));

    let spec = tight(model.quadrature());
    let delta_m = try_integrate_with_breaks(|z| m_closed(kernel, x, z), path.start(), path.end(), &[x], &spec)?.value;

    let mut acc = NeumaierSum::new();
    for (&y, &w) in path.left_points().iter().zip(dw) {
        // 2 infl / (σ f) = 2 σ · infl / (σ² f)
        acc.add(2.0 * model.diffusion(y) * influence_ratio(&law, model, x, y) * w);
    }
    Ok(RepresentationTerms { lhs, boundary: delta_m / root_t, martingale: -acc.value() / root_t })
}

/// `|LHS - RHS|` of the representation along `path`.
pub fn pathwise_representation_check(path: &Path, kernel: &UnbiasedKernel, x: f64) -> Result<f64> {
    Ok(representation_terms(path, kernel, x)?.discrepancy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::WeightFunction;
    use crate::model::DiffusionModel;
    use crate::numerics::integrate;
    use crate::simulate::{simulate_path, SimConfig};

    fn ou() -> DiffusionModel {
        DiffusionModel::ornstein_uhlenbeck(1.0, 1.0)
    }

    fn kernel(wf: WeightFunction) -> UnbiasedKernel {
        UnbiasedKernel::new(wf, ou()).unwrap()
    }

    #[test]
    fn vanish_at_origin() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        assert_eq!(h_func(&k, 0.3, 0.0).unwrap(), 0.0);
        assert_eq!(g_func(&k, 0.3, 0.0).unwrap(), 0.0);
        assert_eq!(m_func(&k, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn h_matches_trapezoid_and_sign() {
        let m = ou();
        let law = m.law().unwrap();
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let h = h_func(&k, 0.0, 1.0).unwrap();
        // integrand 2 F(0)(1 - F(v)) / f(v) on (0, 1), positive
        let n = 200_000;
        let g = |v: f64| 2.0 * 0.5 * (1.0 - law.cdf(v)) / law.density(v);
        let mut s = 0.5 * (g(0.0) + g(1.0));
        for i in 1..n {
            s += g(i as f64 / n as f64);
        }
        let oracle = s / n as f64;
        assert!((h - oracle).abs() < 1e-6 * oracle, "{h} vs {oracle}");
        for v in [0.1, 0.5, 0.9] {
            assert!(influence_ratio(&law, &m, 0.0, v) > 0.0);
        }
        assert!(h > 0.0);
    }

    #[test]
    fn g_constant_weight_closed_form() {
        let k = kernel(WeightFunction::constant(1.0).unwrap());
        // Valid for x ≥ 0; for x < 0 the lower limit 0 lies above x and
        // G_x(y) = 2x(y∧x) - (y∧x)² - x².
        let closed = |x: f64, y: f64| 2.0 * x * y.min(x) - y.min(x).powi(2) - x.min(0.0).powi(2);
        for &(x, y) in &[(1.0, 2.0), (2.0, 1.0), (0.5, -2.0), (-1.0, 0.5), (-1.0, -0.5), (-2.0, -3.0)] {
            assert!((g_func(&k, x, y).unwrap() - closed(x, y)).abs() < 1e-10, "({x},{y})");
        }
        assert!((g_func(&k, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g_func(&k, 2.0, 1.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn m_closed_probes() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let v = m_closed(&k, 0.0, 0.0).unwrap();
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-10, "{v}");
        let law = k.model().law().unwrap();
        for z in [0.5, 1.0, 2.5] {
            let expected = 2.0 * law.influence_numerator(0.3, z) / law.density(z);
            assert_eq!(m_closed(&k, 0.3, z).unwrap(), expected);
        }
    }

    #[test]
    fn m_direct_matches_closed() {
        for wf in [WeightFunction::exponential(1.0).unwrap(), WeightFunction::polynomial(1).unwrap()] {
            let k = kernel(wf);
            for x in [-1.0, 0.0, 1.0] {
                for z in [-2.0, -1.0, 0.5, 1.0, 2.0] {
                    let (d, c) = (m_direct(&k, x, z).unwrap(), m_closed(&k, x, z).unwrap());
                    assert!((d - c).abs() < 1e-6 * c.abs(), "x={x} z={z}: {d} vs {c}");
                }
            }
        }
    }

    #[test]
    fn m_direct_left_tail() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let law = k.model().law().unwrap();
        let z = -12.0;
        let v = m_direct(&k, 0.0, z).unwrap() * law.density(z);
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn regrouping_and_ode() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        for y in [-2.0, -0.5, 1.0, 2.0] {
            let (a, b) = (m_func(&k, 0.0, y).unwrap(), m_func_combined(&k, 0.0, y).unwrap());
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let r = ode_residual(&k, 0.0, 1.0, 1e-4).unwrap();
        assert!(r.abs() < 1e-3, "{r}");
    }

    #[test]
    fn compensator_is_centered() {
        let m = ou();
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        for x in [-1.0, 0.0, 1.0] {
            let e = m.stationary_expectation(|y| coeff_c(&k, x, y).unwrap()).unwrap();
            assert!(e.abs() < 2e-6, "{x}: {e}");
        }
    }

    #[test]
    fn d_is_r_sigma() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 0.7);
        let k = UnbiasedKernel::new(WeightFunction::polynomial(1).unwrap(), m.clone()).unwrap();
        for &(x, y) in &[(0.0, -1.0), (1.0, 0.5), (1.0, 1.5)] {
            let d = coeff_d(&k, x, y).unwrap();
            assert!((d - k.r(x, y).unwrap() * m.diffusion(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_path_has_no_discrepancy() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let path = Path::constant(5.0, 1000, 0.01);
        let t = representation_terms(&path, &k, -12.0).unwrap();
        assert!(t.discrepancy() < 1e-8, "{t:?}");
        assert!(t.boundary == 0.0 && t.martingale.abs() < 1e-8);
    }

    #[test]
    fn requires_increments() {
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let mut path = Path::constant(0.0, 10, 0.1);
        path.wiener_increments = None;
        assert!(matches!(representation_terms(&path, &k, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn simulated_discrepancy_is_small() {
        let m = ou();
        let k = kernel(WeightFunction::exponential(1.0).unwrap());
        let path = simulate_path(&m, &SimConfig::stationary(5.0, 1e-3, 11).with_wiener()).unwrap();
        let t = representation_terms(&path, &k, 0.0).unwrap();
        assert!(t.discrepancy() < 0.2, "{t:?}");
        // sanity: the boundary term is the integral of m between the end points
        let direct = integrate(|z| m_closed(&k, 0.0, z).unwrap(), path.start(), path.end(), m.quadrature()).unwrap();
        assert!((t.boundary * path.horizon().sqrt() - direct.value).abs() < 1e-8);
    }
}
