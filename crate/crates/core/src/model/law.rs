//! Tabulated invariant law.
//!
//! The log-density `ψ(y) = 2∫_0^y S/σ² - max` is accumulated cell by cell
//! with 5-point Gauss–Legendre, starting at 0 and growing outward until the
//! density has fallen by `e^{-700}` relative to its peak. CDF and survival
//! function are cumulated from opposite ends so both keep relative accuracy
//! deep in their respective tails.

use crate::error::{Error, Result};
use crate::numerics::{gauss5, invert_monotone, try_integrate, HermiteTable, NeumaierSum, QuadratureSpec};

use super::{DiffusionModel, RealFn};

const CELL: f64 = 1.0 / 512.0;
const MAX_CELLS_PER_SIDE: usize = 1 << 20;
/// Log-density drop at which the table stops (e^-700 ≈ 1e-304).
const LOG_CUTOFF: f64 = 700.0;
/// Minimum log-density drop accepted when the cell cap is hit first.
const LOG_CUTOFF_FALLBACK: f64 = 45.0;

#[derive(Clone)]
pub struct InvariantLaw {
    log_density: HermiteTable,
    cdf: HermiteTable,
    sf: HermiteTable,
    /// `∫ e^ψ / σ²` over the table.
    mass: f64,
    /// Peak of the scale exponent; `G(S) = mass · e^{log_shift}`.
    log_shift: f64,
    drift: RealFn,
    diffusion_sq: RealFn,
    quad: QuadratureSpec,
}

impl std::fmt::Debug for InvariantLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InvariantLaw")
            .field("support", &self.support())
            .field("normalizer", &self.normalizer())
            .finish()
    }
}

fn walk(model: &DiffusionModel, direction: f64, min_extent: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let slope = |v: f64| model.log_density_slope(v);
    let mut values = vec![0.0];
    let mut slopes = vec![slope(0.0)?];
    let mut peak = 0.0f64;
    let mut phi = NeumaierSum::new();
    for k in 0..MAX_CELLS_PER_SIDE {
        let a = direction * k as f64 * CELL;
        let b = direction * (k + 1) as f64 * CELL;
        let mut failure = None;
        let piece = gauss5(
            |v| match slope(v) {
                Ok(s) => s,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            a,
            b,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        phi.add(piece);
        let value = phi.value();
        if !value.is_finite() {
            return Err(Error::NonFinite { at: b, value });
        }
        values.push(value);
        slopes.push(slope(b)?);
        peak = peak.max(value);
        if b.abs() >= min_extent && value < peak - LOG_CUTOFF && slopes.last().unwrap() * direction < 0.0 {
            return Ok((values, slopes));
        }
    }
    let last = *values.last().unwrap();
    if last < peak - LOG_CUTOFF_FALLBACK {
        Ok((values, slopes))
    } else {
        Err(Error::Tail {
            at: direction * (MAX_CELLS_PER_SIDE as f64) * CELL,
            reason: "invariant density does not decay within the tabulation limit".into(),
        })
    }
}

impl InvariantLaw {
    pub(crate) fn build(model: &DiffusionModel) -> Result<Self> {
        let min_extent = model.quadrature().initial_halfwidth;
        let (right_v, right_s) = walk(model, 1.0, min_extent)?;
        let (left_v, left_s) = walk(model, -1.0, min_extent)?;

        let n_left = left_v.len() - 1;
        let mut phi: Vec<f64> = left_v.iter().rev().copied().collect();
        phi.extend_from_slice(&right_v[1..]);
        let mut slopes: Vec<f64> = left_s.iter().rev().copied().collect();
        slopes.extend_from_slice(&right_s[1..]);

        let log_shift = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let psi: Vec<f64> = phi.iter().map(|p| p - log_shift).collect();
        let lo = -(n_left as f64) * CELL;
        let log_density = HermiteTable::new(lo, CELL, psi, slopes);

        let n = log_density.values().len();
        let speed = |v: f64| log_density.eval(v).exp() / model.diffusion_sq(v);
        let masses: Vec<f64> = (0..n - 1)
            .map(|k| gauss5(speed, log_density.knot(k), log_density.knot(k + 1)))
            .collect();

        let mut forward = Vec::with_capacity(n);
        let mut acc = NeumaierSum::new();
        forward.push(0.0);
        for &m in &masses {
            acc.add(m);
            forward.push(acc.value());
        }
        let mass = acc.value();
        let mut backward = vec![0.0; n];
        let mut acc = NeumaierSum::new();
        for k in (0..n - 1).rev() {
            acc.add(masses[k]);
            backward[k] = acc.value();
        }

        let dens: Vec<f64> = (0..n).map(|k| speed(log_density.knot(k)) / mass).collect();
        let cdf_vals: Vec<f64> = forward.iter().map(|v| v / mass).collect();
        let sf_vals: Vec<f64> = backward.iter().map(|v| v / mass).collect();
        let neg_dens: Vec<f64> = dens.iter().map(|d| -d).collect();

        Ok(Self {
            cdf: HermiteTable::new(lo, CELL, cdf_vals, dens),
            sf: HermiteTable::new(lo, CELL, sf_vals, neg_dens),
            log_density,
            mass,
            log_shift,
            drift: model.drift.clone(),
            diffusion_sq: model.diffusion_sq.clone(),
            quad: *model.quadrature(),
        })
    }

    /// Interval on which the law is tabulated; outside it the mass is below `e^-700`.
    pub fn support(&self) -> (f64, f64) {
        (self.log_density.lo(), self.log_density.hi())
    }

    /// `G(S)` as implied by the table.
    pub fn normalizer(&self) -> f64 {
        self.mass * self.log_shift.exp()
    }

    /// Invariant density `f_S(y)`.
    pub fn density(&self, y: f64) -> f64 {
        let s2 = (self.diffusion_sq)(y);
        if self.log_density.contains(y) {
            return self.log_density.eval(y).exp() / (s2 * self.mass);
        }
        // Continue the log-density by quadrature from the nearest table end.
        let (lo, hi) = self.support();
        let edge = if y < lo { lo } else { hi };
        let start = self.log_density.eval(edge);
        let drift = &self.drift;
        let diff = &self.diffusion_sq;
        match try_integrate(|v| Ok(2.0 * drift(v) / diff(v)), edge, y, &self.quad) {
            Ok(q) => (start + q.value).exp() / (s2 * self.mass),
            Err(_) => f64::NAN,
        }
    }

    /// Invariant CDF `F_S(y)`.
    #[inline]
    pub fn cdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            0.0
        } else if y >= hi {
            1.0
        } else {
            self.cdf.eval(y).clamp(0.0, 1.0)
        }
    }

    /// Survival function `1 - F_S(y)`, accurate in the right tail.
    #[inline]
    pub fn sf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            1.0
        } else if y >= hi {
            0.0
        } else {
            self.sf.eval(y).clamp(0.0, 1.0)
        }
    }

    /// `F_S(x ∧ y) - F_S(x) F_S(y)`, evaluated as `F(min)·(1 - F(max))`.
    #[inline]
    pub fn influence_numerator(&self, x: f64, y: f64) -> f64 {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        self.cdf(a) * self.sf(b)
    }

    /// Inverse CDF on `(0, 1)`, searched from `[-1, 1]` outward.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Precondition(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let (lo_edge, hi_edge) = self.support();
        let (mut a, mut b) = ((-1.0f64).max(lo_edge), 1.0f64.min(hi_edge));
        let mut width: f64 = 1.0;
        while self.cdf(a) > u {
            if a <= lo_edge {
                return Err(Error::Tail { at: a, reason: format!("quantile {u} below tabulated support") });
            }
            width *= 2.0;
            a = (-width).max(lo_edge);
        }
        width = 1.0;
        while self.cdf(b) < u {
            if b >= hi_edge {
                return Err(Error::Tail { at: b, reason: format!("quantile {u} above tabulated support") });
            }
            width *= 2.0;
            b = width.min(hi_edge);
        }
        invert_monotone(|x| self.cdf(x), u, a, b, 1e-12)
    }
}
