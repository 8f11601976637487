//! The kernel `K_x(y) = ∫_y^x dv / (σ²(v) h(v))` and the coefficient
//! functions built from it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DiffusionModel, InvariantLaw, RealFn};
use crate::numerics::{try_integrate, HermiteTable};

use super::weight::WeightFunction;

/// Cells per unit length of the primitive table.
const TABLE_DENSITY: f64 = 512.0;
/// The table never extends beyond `±TABLE_REACH`; quadrature takes over there.
const TABLE_REACH: f64 = 64.0;

#[derive(Clone)]
enum Primitive {
    /// `P(y) = unit(y) / σ²` for constant σ.
    Closed { unit: RealFn, inv_sigma_sq: f64 },
    /// Hermite table of `∫_lo^y 1/(σ²h)`, extended by quadrature outside.
    Table(Arc<HermiteTable>),
}

/// Weight function bound to a model: evaluates `K_x`, `R_x`, `N_x`, `c_x`, `d_x`.
#[derive(Clone)]
pub struct UnbiasedKernel {
    wf: WeightFunction,
    model: DiffusionModel,
    primitive: Primitive,
}

impl std::fmt::Debug for UnbiasedKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prim = match &self.primitive {
            Primitive::Closed { .. } => "closed".to_string(),
            Primitive::Table(t) => format!("table[{}, {}]", t.lo(), t.hi()),
        };
        f.debug_struct("UnbiasedKernel")
            .field("weight", &self.wf)
            .field("model", &self.model.label())
            .field("primitive", &prim)
            .finish()
    }
}

impl UnbiasedKernel {
    pub fn new(wf: WeightFunction, model: DiffusionModel) -> Result<Self> {
        let primitive = match (wf.unit_primitive(), model.constant_diffusion()) {
            (Some(unit), Some(sigma)) => Primitive::Closed { unit: unit.clone(), inv_sigma_sq: 1.0 / (sigma * sigma) },
            _ => {
                let (lo, hi) = match model.law() {
                    Ok(law) => law.support(),
                    Err(_) => {
                        let l = model.quadrature().initial_halfwidth;
                        (-l, l)
                    }
                };
                let (w, m) = (wf.clone(), model.clone());
                let g = move |v: f64| 1.0 / (m.diffusion_sq(v) * w.h(v));
                Primitive::Table(Arc::new(HermiteTable::anchored(g, 0.0, lo.max(-TABLE_REACH), hi.min(TABLE_REACH), 1.0 / TABLE_DENSITY)))
            }
        };
        Ok(Self { wf, model, primitive })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.wf
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn uses_closed_form(&self) -> bool {
        matches!(self.primitive, Primitive::Closed { .. })
    }

    #[inline]
    fn integrand(&self, v: f64) -> f64 {
        1.0 / (self.model.diffusion_sq(v) * self.wf.h(v))
    }

    /// A primitive `P` of `1/(σ² h)`; only differences of it are meaningful.
    #[inline]
    pub fn primitive(&self, y: f64) -> Result<f64> {
        match &self.primitive {
            Primitive::Closed { unit, inv_sigma_sq } => Ok(unit(y) * inv_sigma_sq),
            Primitive::Table(t) => {
                if t.contains(y) {
                    Ok(t.eval(y))
                } else {
                    let edge = if y < t.lo() { t.lo() } else { t.hi() };
                    let tail = try_integrate(|v| Ok(self.integrand(v)), edge, y, self.model.quadrature())?;
                    Ok(t.eval(edge) + tail.value)
                }
            }
        }
    }

    /// `K_x(y)`; exactly antisymmetric in `(x, y)`.
    #[inline]
    pub fn k(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.primitive(x)? - self.primitive(y)?)
    }

    /// `K_x(y)` by direct signed quadrature, independent of the primitive.
    pub fn k_by_quadrature(&self, x: f64, y: f64) -> Result<f64> {
        Ok(try_integrate(|v| Ok(self.integrand(v)), y, x, self.model.quadrature())?.value)
    }

    /// `R_x(y) = 2·1{y<x}·K_x(y)·h(y)`.
    pub fn r(&self, x: f64, y: f64) -> Result<f64> {
        if y >= x {
            return Ok(0.0);
        }
        Ok(2.0 * self.k(x, y)? * self.wf.h(y))
    }

    /// `N_x(y) = 1{y<x}·K_x(y)·h'(y)·σ²(y)`.
    pub fn n(&self, x: f64, y: f64) -> Result<f64> {
        if y >= x {
            return Ok(0.0);
        }
        Ok(self.k(x, y)? * self.wf.h_prime(y) * self.model.diffusion_sq(y))
    }

    /// `1{y<x}·K_x(y)·[2h(y)S(y) + h'(y)σ²(y)]`, the drift part of `c_x`.
    pub fn compensator(&self, x: f64, y: f64) -> Result<f64> {
        if y >= x {
            return Ok(0.0);
        }
        let h = self.wf.h(y);
        Ok(self.k(x, y)? * (2.0 * h * self.model.drift(y) + self.wf.h_prime(y) * self.model.diffusion_sq(y)))
    }

    /// `c_x(y) = 1{y<x}K_x(y)[2hS + h'σ²](y) - F_S(x)`.
    pub fn c(&self, law: &InvariantLaw, x: f64, y: f64) -> Result<f64> {
        Ok(self.compensator(x, y)? - law.cdf(x))
    }

    /// `d_x(y) = 2·1{y<x}·h(y)·K_x(y)·σ(y)`.
    pub fn d(&self, x: f64, y: f64) -> Result<f64> {
        if y >= x {
            return Ok(0.0);
        }
        Ok(2.0 * self.wf.h(y) * self.k(x, y)? * self.model.diffusion(y))
    }

    /// Per-step terms `(P(X_i), 2h(X_i)ΔX_i + h'(X_i)σ²(X_i)dt)` of the Itô sums.
    pub(crate) fn step_terms(&self, values: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = values.len().saturating_sub(1);
        let mut prims = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let y = values[i];
            let dx = values[i + 1] - y;
            prims.push(self.primitive(y)?);
            let w = 2.0 * self.wf.h(y) * dx + self.wf.h_prime(y) * self.model.diffusion_sq(y) * dt;
            if !w.is_finite() {
                return Err(Error::NonFinite { at: y, value: w });
            }
            weights.push(w);
        }
        Ok((prims, weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ou() -> DiffusionModel {
        DiffusionModel::ornstein_uhlenbeck(1.0, 1.0)
    }

    fn kern(wf: WeightFunction) -> UnbiasedKernel {
        UnbiasedKernel::new(wf, ou()).unwrap()
    }

    #[test]
    fn arctan_kernel() {
        let k = kern(WeightFunction::polynomial(1).unwrap());
        assert!(k.uses_closed_form());
        assert!((k.k(0.0, -1.0).unwrap() - PI / 4.0).abs() < 1e-10);
        assert!((k.k_by_quadrature(0.0, -1.0).unwrap() - PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_kernel() {
        let k = kern(WeightFunction::exponential(1.0).unwrap());
        let expected = 1.0 - (-1.0f64).exp();
        assert!((k.k(1.0, 0.0).unwrap() - expected).abs() < 1e-12);
        assert!((k.k_by_quadrature(1.0, 0.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn constant_kernel() {
        let k = kern(WeightFunction::constant(2.0).unwrap());
        assert!((k.k(3.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_probes() {
        let c = kern(WeightFunction::constant(1.0).unwrap());
        assert_eq!(c.r(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(c.r(1.0, 2.0).unwrap(), 0.0);
        assert!((c.r(2.0, 0.0).unwrap() - 4.0).abs() < 1e-14);
        for &(x, y) in &[(2.0, 0.0), (-1.0, -3.0), (0.5, 0.7)] {
            assert_eq!(c.n(x, y).unwrap(), 0.0);
        }

        let p1 = kern(WeightFunction::polynomial(1).unwrap());
        assert!((p1.r(0.0, -1.0).unwrap() - PI).abs() < 1e-10);

        let e1 = kern(WeightFunction::exponential(1.0).unwrap());
        assert_eq!(e1.n(1.0, 1.5).unwrap(), 0.0);
        assert!((e1.n(1.0, 0.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn c_and_d_probes() {
        let m = ou();
        let law = m.law().unwrap();
        let k = kern(WeightFunction::exponential(1.0).unwrap());
        let f0 = law.cdf(0.3);
        assert_eq!(k.c(&law, 0.3, 0.5).unwrap(), -f0);
        assert_eq!(k.d(0.3, 0.5).unwrap(), 0.0);
        for &y in &[-2.0, -0.5, 0.1] {
            let d = k.d(0.3, y).unwrap();
            let r = k.r(0.3, y).unwrap() * m.diffusion(y);
            assert!((d - r).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_primitive_matches_quadrature() {
        let k = kern(WeightFunction::polynomial(2).unwrap());
        assert!(!k.uses_closed_form());
        for &(x, y) in &[(0.0, -1.0), (3.0, -2.5), (1.0, 40.0), (-30.0, 12.0)] {
            let a = k.k(x, y).unwrap();
            let b = k.k_by_quadrature(x, y).unwrap();
            assert!((a - b).abs() < 1e-10, "({x},{y}) {a} vs {b}");
        }
    }

    #[test]
    fn state_dependent_sigma_uses_table() {
        let m = DiffusionModel::new("ou-var", |x| -x, |x: f64| (1.0 + 0.25 * x * x).sqrt());
        let k = UnbiasedKernel::new(WeightFunction::exponential(1.0).unwrap(), m).unwrap();
        assert!(!k.uses_closed_form());
        for &(x, y) in &[(0.0, -1.0), (2.0, 0.5)] {
            assert!((k.k(x, y).unwrap() - k.k_by_quadrature(x, y).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn custom_weight_uses_table() {
        let wf = WeightFunction::custom(|u: f64| 2.0 + u.sin(), |u: f64| u.cos(), None);
        let k = kern(wf);
        assert!(!k.uses_closed_form());
        assert!((k.k(1.0, -2.0).unwrap() - k.k_by_quadrature(1.0, -2.0).unwrap()).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn antisymmetric(x in -10.0f64..10.0, y in -10.0f64..10.0, p in 1u32..4) {
            let k = kern(WeightFunction::polynomial(p).unwrap());
            let kxy = k.k(x, y).unwrap();
            let kyx = k.k(y, x).unwrap();
            prop_assert!((kxy + kyx).abs() <= 1e-12);
        }
    }
}
