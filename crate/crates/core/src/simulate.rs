//! Euler–Maruyama path generation with a deterministic seeding contract.
//!
//! Every path is a pure function of `(model, SimConfig)`. Replications get
//! private generators through [`derive_substream_seed`], so paths can be
//! produced on any number of workers without changing a single bit.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiffusionModel;

/// Upper bound on `T/dt`.
pub const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `X_0` drawn from the invariant law.
    Stationary,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub init: Init,
    #[serde(default)]
    pub store_wiener: bool,
    /// Time simulated and discarded before `t = 0` (fixed init only).
    #[serde(default)]
    pub burn_in: f64,
}

impl SimConfig {
    pub fn stationary(horizon: f64, dt: f64, seed: u64) -> Self {
        Self { horizon, dt, seed, init: Init::Stationary, store_wiener: false, burn_in: 0.0 }
    }

    pub fn fixed(horizon: f64, dt: f64, seed: u64, x0: f64) -> Self {
        Self { init: Init::Fixed(x0), ..Self::stationary(horizon, dt, seed) }
    }

    pub fn with_wiener(mut self) -> Self {
        self.store_wiener = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be positive and finite (got {})", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            bad.push(format!("horizon must be finite and at least dt (got T = {}, dt = {})", self.horizon, self.dt));
        }
        if self.horizon / self.dt > MAX_STEPS {
            bad.push(format!("T/dt = {} exceeds the {} step limit", self.horizon / self.dt, MAX_STEPS));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            bad.push(format!("burn_in must be finite and >= 0 (got {})", self.burn_in));
        }
        if self.burn_in > 0.0 && self.init == Init::Stationary {
            bad.push("burn_in only applies to fixed initialization".to_string());
        }
        if let Init::Fixed(x0) = self.init {
            if !x0.is_finite() {
                bad.push(format!("x0 must be finite (got {x0})"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// `round(T/dt)`, at least 1.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    /// Effective horizon `n·dt`.
    pub fn effective_horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
}

/// A trajectory on the uniform grid `t_i = i·dt`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dt: f64,
    pub values: Vec<f64>,
    /// `ΔW_i = W_{t_{i+1}} - W_{t_i}`, `n` entries, when requested.
    pub wiener_increments: Option<Vec<f64>>,
    pub seed_used: u64,
}

impl Path {
    /// Constant path, handy as a test fixture.
    pub fn constant(value: f64, steps: usize, dt: f64) -> Self {
        Self { dt, values: vec![value; steps + 1], wiener_increments: Some(vec![0.0; steps]), seed_used: 0 }
    }

    pub fn steps(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn end(&self) -> f64 {
        *self.values.last().expect("path has at least one point")
    }

    /// Left endpoints `X_{t_0}, …, X_{t_{n-1}}`.
    pub fn left_points(&self) -> &[f64] {
        &self.values[..self.steps()]
    }

    /// Writes `t,x[,dW]`; the `dW` column holds `ΔW_i` on row `i` and is empty on the final row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let with_dw = self.wiener_increments.is_some();
        let io = |e: csv::Error| Error::io("path csv", e);
        if with_dw {
            w.write_record(["t", "x", "dW"]).map_err(io)?;
        } else {
            w.write_record(["t", "x"]).map_err(io)?;
        }
        for (i, &x) in self.values.iter().enumerate() {
            let t = crate::harness::fmt_f64(i as f64 * self.dt);
            let x = crate::harness::fmt_f64(x);
            match &self.wiener_increments {
                Some(dw) => {
                    let d = dw.get(i).map(|v| crate::harness::fmt_f64(*v)).unwrap_or_default();
                    w.write_record([t, x, d]).map_err(io)?;
                }
                None => w.write_record([t, x]).map_err(io)?,
            }
        }
        w.flush().map_err(|e| Error::io("path csv", e))?;
        Ok(())
    }
}

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master_seed`.
///
/// `mix64(mix64(master) + (index + 1)·γ)` with odd `γ`: injective in `index`
/// for a fixed master seed, and well mixed across neighbouring masters.
pub fn derive_substream_seed(master_seed: u64, replication_index: u64) -> u64 {
    const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
    mix64(mix64(master_seed).wrapping_add(replication_index.wrapping_add(1).wrapping_mul(GAMMA)))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn step(model: &DiffusionModel, x: f64, dt: f64, dw: f64) -> f64 {
    x + model.drift(x) * dt + model.diffusion(x) * dw
}

/// Euler–Maruyama path `X_{i+1} = X_i + S(X_i) dt + σ(X_i) ΔW_i`.
pub fn simulate_path(model: &DiffusionModel, cfg: &SimConfig) -> Result<Path> {
    cfg.validate()?;
    let n = cfg.steps();
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let mut rng = rng_for(cfg.seed);

    let mut x = match cfg.init {
        Init::Stationary => {
            let u: f64 = rng.sample(Open01);
            model.invariant_quantile(u)?
        }
        Init::Fixed(x0) => x0,
    };
    let burn = (cfg.burn_in / dt).round() as usize;
    for i in 0..burn {
        let z: f64 = rng.sample(StandardNormal);
        x = step(model, x, dt, sqrt_dt * z);
        if !x.is_finite() {
            return Err(Error::Explosion { step: i, state: x });
        }
    }

    let mut values = Vec::with_capacity(n + 1);
    let mut incs = if cfg.store_wiener { Some(Vec::with_capacity(n)) } else { None };
    values.push(x);
    for i in 0..n {
        let dw = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        x = step(model, x, dt, dw);
        if !x.is_finite() {
            return Err(Error::Explosion { step: i + 1, state: x });
        }
        values.push(x);
        if let Some(v) = incs.as_mut() {
            v.push(dw);
        }
    }
    Ok(Path { dt, values, wiener_increments: incs, seed_used: cfg.seed })
}

/// Euler–Maruyama driven by given Wiener increments.
pub fn simulate_with_increments(model: &DiffusionModel, x0: f64, dt: f64, increments: Vec<f64>) -> Result<Path> {
    if increments.is_empty() {
        return Err(Error::Precondition("at least one increment is required".into()));
    }
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut x = x0;
    values.push(x);
    for (i, &dw) in increments.iter().enumerate() {
        x = step(model, x, dt, dw);
        if !x.is_finite() {
            return Err(Error::Explosion { step: i + 1, state: x });
        }
        values.push(x);
    }
    Ok(Path { dt, values, wiener_increments: Some(increments), seed_used: 0 })
}

/// Brownian-bridge refinement: each increment over `dt` is split into two over
/// `dt/2` that sum to it exactly in distribution and (up to rounding) in value.
pub fn refine_increments(coarse: &[f64], dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed);
    let half_sd = 0.5 * dt.sqrt();
    let mut fine = Vec::with_capacity(2 * coarse.len());
    for &dw in coarse {
        let z: f64 = rng.sample(StandardNormal);
        let a = 0.5 * dw + half_sd * z;
        fine.push(a);
        fine.push(dw - a);
    }
    fine
}

/// Left-endpoint occupation average `(1/n) Σ_{i<n} g(X_{t_i})`.
pub fn occupation_mean<G: Fn(f64) -> f64>(path: &Path, g: G) -> Result<f64> {
    let pts = path.left_points();
    let mut acc = crate::numerics::NeumaierSum::new();
    for &x in pts {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { at: x, value: v });
        }
        acc.add(v);
    }
    Ok(acc.value() / pts.len() as f64)
}
