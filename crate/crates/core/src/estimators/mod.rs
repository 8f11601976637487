//! The empirical distribution function and the unbiased estimator family
//!
//! `F̃_T(x) = (1/T) ∫ R_x(X_t) dX_t + (1/T) ∫ N_x(X_t) dt`,
//!
//! both discretized with left-endpoint (Itô) sums.

mod kernel;
mod weight;

use serde::Serialize;

pub use kernel::UnbiasedKernel;
pub use weight::{EstimatorSpec, WeightFunction, WeightKind};

use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::numerics::NeumaierSum;
use crate::simulate::Path;

/// `(1/n) Σ_{i<n} 1{X_{t_i} < x}`.
pub fn edf(path: &Path, x: f64) -> f64 {
    let pts = path.left_points();
    if pts.is_empty() {
        return 0.0;
    }
    pts.iter().filter(|&&v| v < x).count() as f64 / pts.len() as f64
}

/// Left-endpoint discretization of the unbiased estimator at one `x`.
pub fn unbiased_estimate(path: &Path, kernel: &UnbiasedKernel, x: f64) -> Result<f64> {
    if path.values.len() < 2 {
        return Err(Error::Precondition("path needs at least two grid points".into()));
    }
    let mut acc = NeumaierSum::new();
    for w in path.values.windows(2) {
        let y = w[0];
        if y >= x {
            continue;
        }
        acc.add(kernel.r(x, y)? * (w[1] - y));
        acc.add(kernel.n(x, y)? * path.dt);
    }
    Ok(acc.value() / path.horizon())
}

/// An estimator that can be evaluated on a whole grid from one path.
pub trait PathEstimator: Send + Sync {
    /// Spec string, e.g. `edf` or `unbiased:exp:delta=1`.
    fn tag(&self) -> String;

    /// Estimates at every point of `xs` (sorted ascending).
    fn curve(&self, path: &Path, xs: &[f64]) -> Result<Vec<f64>>;
}

/// The empirical distribution function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Edf;

impl PathEstimator for Edf {
    fn tag(&self) -> String {
        "edf".into()
    }

    fn curve(&self, path: &Path, xs: &[f64]) -> Result<Vec<f64>> {
        let mut sorted = path.left_points().to_vec();
        if sorted.is_empty() {
            return Ok(vec![0.0; xs.len()]);
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        Ok(xs.iter().map(|&x| sorted.partition_point(|&v| v < x) as f64 / n).collect())
    }
}

impl PathEstimator for UnbiasedKernel {
    fn tag(&self) -> String {
        EstimatorSpec::Unbiased(self.weight().kind()).to_string()
    }

    fn curve(&self, path: &Path, xs: &[f64]) -> Result<Vec<f64>> {
        if path.values.len() < 2 {
            return Err(Error::Precondition("path needs at least two grid points".into()));
        }
        // Σ_{y_i < x} (P(x) - P(y_i))·w_i = P(x)·Σ w_i - Σ P(y_i) w_i, with both
        // sums read off prefix sums over the steps sorted by y_i.
        let (prims, weights) = self.step_terms(&path.values, path.dt)?;
        let left = path.left_points();
        let mut order: Vec<usize> = (0..left.len()).collect();
        order.sort_by(|&a, &b| left[a].total_cmp(&left[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| left[i]).collect();
        let mut sum_w = Vec::with_capacity(order.len() + 1);
        let mut sum_pw = Vec::with_capacity(order.len() + 1);
        let (mut acc_w, mut acc_pw) = (NeumaierSum::new(), NeumaierSum::new());
        sum_w.push(0.0);
        sum_pw.push(0.0);
        for &i in &order {
            acc_w.add(weights[i]);
            acc_pw.add(prims[i] * weights[i]);
            sum_w.push(acc_w.value());
            sum_pw.push(acc_pw.value());
        }
        let t = path.horizon();
        xs.iter()
            .map(|&x| {
                let k = sorted.partition_point(|&v| v < x);
                if k == 0 {
                    return Ok(0.0);
                }
                Ok((self.primitive(x)? * sum_w[k] - sum_pw[k]) / t)
            })
            .collect()
    }
}

/// Builds the estimator named by `spec` for `model`.
pub fn build_estimator(spec: &EstimatorSpec, model: &DiffusionModel) -> Result<Box<dyn PathEstimator>> {
    match spec {
        EstimatorSpec::Edf => Ok(Box::new(Edf)),
        EstimatorSpec::Unbiased(kind) => {
            Ok(Box::new(UnbiasedKernel::new(WeightFunction::from_kind(*kind)?, model.clone())?))
        }
    }
}

/// An estimator evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCurve {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub estimator_tag: String,
    pub horizon_t: f64,
}

impl EstimateCurve {
    /// CSV with header `x,estimate`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("estimate csv", e);
        w.write_record(["x", "estimate"]).map_err(io)?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            w.write_record([crate::harness::fmt_f64(*x), crate::harness::fmt_f64(*v)]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("estimate csv", e))
    }
}

pub(crate) fn check_grid(xs: &[f64]) -> Result<()> {
    if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("grid point {i} is not finite")));
    }
    if let Some(i) = xs.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::validation(format!("grid must be strictly increasing (xs[{i}] >= xs[{}])", i + 1)));
    }
    Ok(())
}

pub fn estimate_curve(path: &Path, xs: &[f64], estimator: &dyn PathEstimator) -> Result<EstimateCurve> {
    check_grid(xs)?;
    let values = estimator.curve(path, xs)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { at: xs[i], value: values[i] });
    }
    Ok(EstimateCurve { xs: xs.to_vec(), values, estimator_tag: estimator.tag(), horizon_t: path.horizon() })
}

/// Numerical screen of the moment and boundary conditions on `R_x`, `N_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cond1Report {
    pub x: f64,
    /// `E (R_x(ξ) σ(ξ))²` is finite.
    pub flag1: bool,
    /// `E |N_x(ξ)|` is finite.
    pub flag2: bool,
    /// `R_x(y) σ²(y) f_S(y) → 0` as `y → -∞`.
    pub flag3: bool,
    pub second_moment: Option<f64>,
    pub abs_moment_n: Option<f64>,
    /// `(y, R_x(y) σ²(y) f_S(y))` at `y = -2^k L₀`.
    pub tail_probe: Vec<(f64, f64)>,
}

impl Cond1Report {
    pub fn all_ok(&self) -> bool {
        self.flag1 && self.flag2 && self.flag3
    }
}

fn or_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

pub fn check_cond1(kernel: &UnbiasedKernel, x: f64) -> Cond1Report {
    let model = kernel.model();
    let second = model
        .stationary_expectation(|y| {
            let v = or_nan(kernel.r(x, y)) * model.diffusion(y);
            v * v
        })
        .ok()
        .filter(|v| v.is_finite());
    let abs_n = model
        .stationary_expectation(|y| or_nan(kernel.n(x, y)).abs())
        .ok()
        .filter(|v| v.is_finite());

    let l0 = model.quadrature().initial_halfwidth;
    let tail_probe: Vec<(f64, f64)> = match model.law() {
        Ok(law) => (0..=6)
            .map(|k| {
                let y = (x.min(0.0)) - l0 * 2f64.powi(k);
                (y, or_nan(kernel.r(x, y)) * model.diffusion_sq(y) * law.density(y))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    let flag3 = !tail_probe.is_empty()
        && tail_probe.iter().all(|(_, v)| v.is_finite())
        && tail_probe.last().is_some_and(|(_, v)| v.abs() < 1e-10)
        && tail_probe.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs());

    Cond1Report { x, flag1: second.is_some(), flag2: abs_n.is_some(), flag3, second_moment: second, abs_moment_n: abs_n, tail_probe }
}

/// `E R_x(ξ)²`, the growth diagnostic for constant weights.
pub fn second_moment_r(kernel: &UnbiasedKernel, x: f64) -> Result<f64> {
    let model = kernel.model();
    let v = model.stationary_expectation(|y| {
        let r = or_nan(kernel.r(x, y));
        r * r
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { at: x, value: v })
    }
}
