#![allow(dead_code)]

use ergodic_cdf::{DiffusionModel, UnbiasedKernel, WeightFunction};

pub fn ou() -> DiffusionModel {
    DiffusionModel::ornstein_uhlenbeck(1.0, 1.0)
}

pub fn kernel(wf: WeightFunction) -> UnbiasedKernel {
    UnbiasedKernel::new(wf, ou()).unwrap()
}

pub fn exp_kernel() -> UnbiasedKernel {
    kernel(WeightFunction::exponential(1.0).unwrap())
}

/// Φ(z) from the Maclaurin series of erf for |z/√2| ≤ 3 and the erfc
/// continued fraction beyond.
pub fn phi(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let erf = if x.abs() <= 3.0 {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        let a = x.abs();
        let mut f = 0.0;
        for k in (1..200).rev() {
            f = (k as f64 / 2.0) / (a + f);
        }
        x.signum() * (1.0 - (-a * a).exp() / std::f64::consts::PI.sqrt() / (a + f))
    };
    0.5 * (1.0 + erf)
}

/// Invariant CDF of OU(1,1), the law N(0, 1/2).
pub fn ou_cdf(x: f64) -> f64 {
    phi(x * std::f64::consts::SQRT_2)
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64).sqrt()
}
