//! Scalar diffusion models and their invariant law.
//!
//! A [`DiffusionModel`] holds the drift `S` and diffusion `σ` as shared
//! function handles. The closed-form invariant quantities (scale exponent,
//! scale function, normalizer `G(S)`, density, CDF) are available both as
//! direct quadratures and through a tabulated [`InvariantLaw`] that the
//! Monte Carlo and efficiency code use in their inner loops.

mod catalog;
mod law;

use std::fmt;
use std::sync::{Arc, OnceLock};

pub use catalog::ModelSpec;
pub use law::InvariantLaw;

use crate::error::{Error, Result};
use crate::numerics::{try_integrate, try_integrate_line, try_integrate_lower, QuadratureSpec};

/// Real function handle shared between threads.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `dX_t = S(X_t) dt + σ(X_t) dW_t`.
#[derive(Clone)]
pub struct DiffusionModel {
    label: String,
    drift: RealFn,
    diffusion: RealFn,
    diffusion_sq: RealFn,
    /// Set when σ is a known constant; enables closed-form kernel primitives.
    constant_diffusion: Option<f64>,
    spec: Option<ModelSpec>,
    quad: QuadratureSpec,
    normalizer: Arc<OnceLock<Result<f64>>>,
    law: Arc<OnceLock<Result<Arc<InvariantLaw>>>>,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("label", &self.label)
            .field("constant_diffusion", &self.constant_diffusion)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

impl DiffusionModel {
    /// Model with state-dependent σ; `σ²` is computed as `σ·σ`.
    pub fn new<S, D>(label: impl Into<String>, drift: S, diffusion: D) -> Self
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let diffusion: RealFn = Arc::new(diffusion);
        let d = diffusion.clone();
        Self::assemble(label.into(), Arc::new(drift), diffusion, Arc::new(move |x| {
            let s = d(x);
            s * s
        }), None)
    }

    /// Model with constant σ = `sigma`.
    pub fn with_constant_diffusion<S>(label: impl Into<String>, drift: S, sigma: f64) -> Self
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let sq = sigma * sigma;
        Self::assemble(label.into(), Arc::new(drift), Arc::new(move |_| sigma), Arc::new(move |_| sq), Some(sigma))
    }

    fn assemble(label: String, drift: RealFn, diffusion: RealFn, diffusion_sq: RealFn, constant: Option<f64>) -> Self {
        Self {
            label,
            drift,
            diffusion,
            diffusion_sq,
            constant_diffusion: constant,
            spec: None,
            quad: QuadratureSpec::default(),
            normalizer: Arc::new(OnceLock::new()),
            law: Arc::new(OnceLock::new()),
        }
    }

    pub(crate) fn with_spec(mut self, spec: ModelSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    /// Replace the quadrature settings. Resets the cached normalizer and law.
    pub fn with_quadrature(mut self, quad: QuadratureSpec) -> Self {
        self.quad = quad;
        self.normalizer = Arc::new(OnceLock::new());
        self.law = Arc::new(OnceLock::new());
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn constant_diffusion(&self) -> Option<f64> {
        self.constant_diffusion
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    #[inline]
    pub fn diffusion_sq(&self, x: f64) -> f64 {
        (self.diffusion_sq)(x)
    }

    fn checked_diffusion_sq(&self, x: f64) -> Result<f64> {
        let s2 = self.diffusion_sq(x);
        if s2 > 0.0 && s2.is_finite() {
            Ok(s2)
        } else {
            Err(Error::Precondition(format!("σ²({x}) = {s2} is not positive")))
        }
    }

    /// `2 S(v) / σ²(v)`, the derivative of the scale exponent.
    #[inline]
    pub(crate) fn log_density_slope(&self, v: f64) -> Result<f64> {
        Ok(2.0 * self.drift(v) / self.checked_diffusion_sq(v)?)
    }

    /// `2 ∫_0^y S(v)/σ²(v) dv`, signed.
    pub fn scale_exponent(&self, y: f64) -> Result<f64> {
        Ok(try_integrate(|v| self.log_density_slope(v), 0.0, y, &self.quad)?.value)
    }

    /// `V_S(x) = ∫_0^x exp{-2 ∫_0^y S/σ²} dy`.
    pub fn scale_function(&self, x: f64) -> Result<f64> {
        let r = try_integrate(
            |y| {
                let e = self.scale_exponent(y)?;
                let v = (-e).exp();
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Overflow { at: y })
                }
            },
            0.0,
            x,
            &self.quad,
        );
        match r {
            Ok(q) => Ok(q.value),
            Err(Error::NonFinite { at, .. }) => Err(Error::Overflow { at }),
            Err(e) => Err(e),
        }
    }

    /// Unnormalized invariant density `exp{scale_exponent(y)}/σ²(y)` by direct quadrature.
    fn speed_density(&self, y: f64) -> Result<f64> {
        Ok(self.scale_exponent(y)?.exp() / self.checked_diffusion_sq(y)?)
    }

    /// `G(S) = ∫ σ⁻² exp{2∫_0^x S/σ²} dx`, cached after the first call.
    pub fn normalizing_constant(&self) -> Result<f64> {
        self.normalizer
            .get_or_init(|| {
                let r = try_integrate_line(
                    |y| match self.speed_density(y) {
                        Ok(v) if v.is_infinite() => Err(Error::Overflow { at: y }),
                        other => other,
                    },
                    &self.quad,
                );
                match r {
                    Ok(q) => Ok(q.value),
                    Err(Error::Overflow { at }) => Err(Error::Divergent { halfwidth: at.abs() }),
                    Err(e) => Err(e),
                }
            })
            .clone()
    }

    /// `f_S(y)` by direct quadrature of the scale exponent.
    pub fn invariant_density(&self, y: f64) -> Result<f64> {
        let g = self.normalizing_constant()?;
        Ok(self.speed_density(y)? / g)
    }

    /// `F_S(x) = ∫_{-∞}^x f_S` by tail-truncated quadrature, clamped to [0, 1].
    pub fn invariant_cdf(&self, x: f64) -> Result<f64> {
        let g = self.normalizing_constant()?;
        let r = try_integrate_lower(|y| self.speed_density(y), x, &[], &self.quad)?;
        Ok((r.value / g).clamp(0.0, 1.0))
    }

    /// Tabulated invariant law, built on first use.
    pub fn law(&self) -> Result<Arc<InvariantLaw>> {
        self.law
            .get_or_init(|| {
                self.normalizing_constant()?;
                InvariantLaw::build(self).map(Arc::new)
            })
            .clone()
    }

    /// `x` with `|F_S(x) - u| ≤ 1e-10`.
    pub fn invariant_quantile(&self, u: f64) -> Result<f64> {
        self.law()?.quantile(u)
    }

    /// `E_S g(ξ)` for `ξ` distributed according to the invariant law.
    pub fn stationary_expectation<G>(&self, g: G) -> Result<f64>
    where
        G: Fn(f64) -> f64,
    {
        let law = self.law()?;
        Ok(try_integrate_line(|z| Ok(g(z) * law.density(z)), &self.quad)?.value)
    }

    /// Numerical screen of the existence and ergodicity conditions.
    pub fn check_ergodicity(&self, probe_radius: f64) -> ErgodicityReport {
        let outer: Vec<f64> = (0..=6).map(|k| probe_radius * 2f64.powi(k)).collect();

        // Growth bound x S(x) + σ²(x) ≤ A (1 + x²): fit A on an inner grid and
        // require it to keep holding at the outer probes.
        let ratio = |x: f64| (x * self.drift(x) + self.diffusion_sq(x)) / (1.0 + x * x);
        let inner: Vec<f64> = (0..=200).map(|k| -probe_radius + probe_radius * k as f64 / 100.0).collect();
        let a_fit = inner.iter().map(|&x| ratio(x)).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let es_ok = a_fit.is_finite()
            && outer
                .iter()
                .flat_map(|&l| [l, -l])
                .all(|x| ratio(x).is_finite() && ratio(x) <= a_fit * (1.0 + 1e-9) + 1e-12);

        let diverges_along = |sign: f64| {
            let mut last = 0.0f64;
            for &l in &outer {
                let v = match self.scale_function(sign * l) {
                    Ok(v) if v.is_finite() => v.abs(),
                    // Overflow of the integrand: |V_S| has already left f64 range.
                    Err(Error::Overflow { .. }) | Err(Error::NonFinite { .. }) | Ok(_) => f64::INFINITY,
                    Err(_) => return false,
                };
                if v.is_infinite() {
                    return true;
                }
                if !(v > last) {
                    return false;
                }
                last = v;
            }
            true
        };
        let vs_diverges = diverges_along(1.0) && diverges_along(-1.0);

        let (g_finite, g_value) = match self.normalizing_constant() {
            Ok(g) if g > 0.0 && g.is_finite() => (true, g),
            _ => (false, f64::INFINITY),
        };

        let mut probe_points = inner;
        probe_points.extend(outer.iter().flat_map(|&l| [l, -l]));
        ErgodicityReport { es_ok, vs_diverges, g_finite, g_value, growth_constant: a_fit, probe_points }
    }
}

/// Outcome of [`DiffusionModel::check_ergodicity`]. A numerical screen, not a proof.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ErgodicityReport {
    pub es_ok: bool,
    pub vs_diverges: bool,
    pub g_finite: bool,
    /// `G(S)`; `inf` when the normalizer diverges (serialized as null).
    pub g_value: f64,
    /// Fitted `A` of the growth bound.
    pub growth_constant: f64,
    pub probe_points: Vec<f64>,
}

impl ErgodicityReport {
    pub fn all_ok(&self) -> bool {
        self.es_ok && self.vs_diverges && self.g_finite
    }
}

/// Derivative of `σ²(y) f_S(y)` by central differences; equals `2 S(y) f_S(y)`.
pub fn flux_derivative(model: &DiffusionModel, y: f64, step: f64) -> Result<f64> {
    let law = model.law()?;
    let g = |v: f64| model.diffusion_sq(v) * law.density(v);
    Ok((g(y + step) - g(y - step)) / (2.0 * step))
}
