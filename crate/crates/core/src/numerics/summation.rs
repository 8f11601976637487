//! Compensated (Neumaier) summation.
//!
//! All Monte Carlo reductions go through [`NeumaierSum`] so that results do
//! not depend on accumulation order beyond the compensated rounding error.

use crate::error::{Error, Result};

/// Running Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        // Once the running sum is non-finite the compensation is garbage (inf - inf).
        if self.sum.is_finite() {
            self.sum + self.compensation
        } else {
            self.sum
        }
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        acc.extend(iter);
        acc
    }
}

/// Compensated sum of `xs`. Non-finite inputs propagate to the result.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<NeumaierSum>().value()
}

/// Like [`compensated_sum`] but reports the first non-finite input.
pub fn checked_sum(xs: &[f64]) -> Result<f64> {
    if let Some((i, &v)) = xs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { at: i as f64, value: v });
    }
    Ok(compensated_sum(xs))
}

/// Mean with compensated accumulation; 0 for an empty slice.
pub fn compensated_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    compensated_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator) with a two-pass compensated scheme.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = compensated_mean(xs);
    let ss: NeumaierSum = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    ss.value() / (xs.len() - 1) as f64
}
