//! Monte Carlo integrated risk `ρ̂_T = T · mean_r ∫ e_r(x)² ν(dx)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{efficiency_bound, local_variance, NuMeasure};
use crate::error::{Error, Result};
use crate::estimators::{check_grid, PathEstimator};
use crate::model::DiffusionModel;
use crate::numerics::{compensated_mean, sample_variance, NeumaierSum};
use crate::simulate::{derive_substream_seed, simulate_path, SimConfig};

/// Where the numbers came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProvenance {
    pub model: String,
    pub nu: NuMeasure,
    pub master_seed: u64,
    /// Seed of every replication, in replication order, aborted ones included.
    pub path_seeds: Vec<u64>,
    /// Indices of replications lost to explosions.
    pub aborted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimator: String,
    pub xs: Vec<f64>,
    pub bias: Vec<f64>,
    /// `T · Var(F̄_T(x) - F_S(x))`
    pub scaled_variance: Vec<f64>,
    /// `R_S(x,x)`
    pub local_bound: Vec<f64>,
    pub scaled_risk: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Replications that entered the averages.
    pub replications: usize,
    pub horizon_t: f64,
    pub dt: f64,
    pub config: RiskProvenance,
}

impl RiskReport {
    /// CSV with header `x,bias,scaled_variance,local_bound`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::harness::fmt_f64;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("risk csv", e);
        w.write_record(["x", "bias", "scaled_variance", "local_bound"]).map_err(io)?;
        for j in 0..self.xs.len() {
            w.write_record([
                fmt_f64(self.xs[j]),
                fmt_f64(self.bias[j]),
                fmt_f64(self.scaled_variance[j]),
                fmt_f64(self.local_bound[j]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("risk csv", e))
    }
}

/// [`empirical_risk_paired`] for a single estimator.
pub fn empirical_risk(
    model: &DiffusionModel,
    estimator: &dyn PathEstimator,
    nu: &NuMeasure,
    sim: &SimConfig,
    replications: usize,
    xs: &[f64],
    workers: usize,
) -> Result<RiskReport> {
    let mut v = empirical_risk_paired(model, &[estimator], nu, sim, replications, xs, workers)?;
    Ok(v.remove(0))
}

/// Errors `e_r(x_j)` of every estimator on one replication's path.
type Replication = std::result::Result<Vec<Vec<f64>>, Error>;

/// Integrated risk of several estimators on common paths.
///
/// Replication `r` uses the path seeded by `derive_substream_seed(sim.seed, r)`
/// for every estimator. Replications run on `workers` threads (0: rayon's
/// default); results are reduced sequentially in replication order, so the
/// output does not depend on the worker count.
pub fn empirical_risk_paired(
    model: &DiffusionModel,
    estimators: &[&dyn PathEstimator],
    nu: &NuMeasure,
    sim: &SimConfig,
    replications: usize,
    xs: &[f64],
    workers: usize,
) -> Result<Vec<RiskReport>> {
    let mut bad = Vec::new();
    if replications < 2 {
        bad.push(format!("replications must be >= 2 (got {replications})"));
    }
    if xs.len() < 2 && !matches!(nu, NuMeasure::PointMasses { .. }) {
        bad.push("the grid needs at least two points".to_string());
    }
    if estimators.is_empty() {
        bad.push("no estimator given".to_string());
    }
    if let Err(Error::Validation(v)) = sim.validate() {
        bad.extend(v);
    }
    if let Err(Error::Validation(v)) = nu.validate() {
        bad.extend(v);
    }
    if let Err(Error::Validation(v)) = check_grid(xs) {
        bad.extend(v);
    }
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let outside = nu.mass_outside(xs[0], xs[xs.len() - 1]);
    if !(outside < 1e-6) {
        return Err(Error::Precondition(format!(
            "nu puts mass {outside:e} outside the grid [{}, {}]; widen the grid",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let weights = nu.grid_weights(xs)?;
    let law = model.law()?;
    let truth: Vec<f64> = xs.iter().map(|&x| law.cdf(x)).collect();
    let local_bound = xs.iter().map(|&x| local_variance(model, x)).collect::<Result<Vec<_>>>()?;
    let bound = efficiency_bound(model, nu)?;

    let seeds: Vec<u64> = (0..replications as u64).map(|r| derive_substream_seed(sim.seed, r)).collect();
    let run_one = |seed: u64| -> Replication {
        let path = simulate_path(model, &sim.clone().with_seed(seed))?;
        estimators
            .iter()
            .map(|e| {
                let curve = e.curve(&path, xs)?;
                Ok(curve.iter().zip(&truth).map(|(v, t)| v - t).collect())
            })
            .collect()
    };
    let outcomes: Vec<Replication> = if workers == 1 {
        seeds.iter().map(|&s| run_one(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| run_one(s)).collect())
    };

    let mut kept: Vec<Vec<Vec<f64>>> = Vec::with_capacity(replications);
    let mut aborted = Vec::new();
    let mut first_explosion = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(errs) => kept.push(errs),
            Err(e @ Error::Explosion { .. }) => {
                aborted.push(r);
                first_explosion.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if aborted.len() * 100 > replications || kept.len() < 2 {
        return Err(first_explosion.unwrap_or_else(|| Error::Precondition("too few replications survived".into())));
    }

    let horizon = sim.effective_horizon();
    let provenance = RiskProvenance {
        model: model.spec().map(|s| s.to_string()).unwrap_or_else(|| model.label().to_string()),
        nu: nu.clone(),
        master_seed: sim.seed,
        path_seeds: seeds,
        aborted,
    };
    let reports = estimators
        .iter()
        .enumerate()
        .map(|(k, est)| {
            let mut bias = Vec::with_capacity(xs.len());
            let mut scaled_variance = Vec::with_capacity(xs.len());
            let mut column = vec![0.0; kept.len()];
            for j in 0..xs.len() {
                for (c, rep) in column.iter_mut().zip(&kept) {
                    *c = rep[k][j];
                }
                bias.push(compensated_mean(&column));
                scaled_variance.push(horizon * sample_variance(&column));
            }
            let per_rep: Vec<f64> = kept
                .iter()
                .map(|rep| rep[k].iter().zip(&weights).map(|(e, w)| w * e * e).collect::<NeumaierSum>().value())
                .collect();
            let scaled_risk = horizon * compensated_mean(&per_rep);
            RiskReport {
                estimator: est.tag(),
                xs: xs.to_vec(),
                bias,
                scaled_variance,
                local_bound: local_bound.clone(),
                scaled_risk,
                bound,
                ratio: scaled_risk / bound,
                replications: kept.len(),
                horizon_t: horizon,
                dt: sim.dt,
                config: provenance.clone(),
            }
        })
        .collect();
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{Edf, UnbiasedKernel, WeightFunction};
    use crate::simulate::Path;

    struct Truth(DiffusionModel);

    impl PathEstimator for Truth {
        fn tag(&self) -> String {
            "truth".into()
        }
        fn curve(&self, _: &Path, xs: &[f64]) -> Result<Vec<f64>> {
            let law = self.0.law()?;
            Ok(xs.iter().map(|&x| law.cdf(x)).collect())
        }
    }

    fn grid() -> Vec<f64> {
        (0..=100).map(|k| -5.0 + 0.1 * k as f64).collect()
    }

    #[test]
    fn truth_stub_has_zero_risk() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 1.0);
        let sim = SimConfig::stationary(1.0, 0.01, 5);
        let r = empirical_risk(&m, &Truth(m.clone()), &NuMeasure::default(), &sim, 4, &grid(), 1).unwrap();
        assert_eq!(r.scaled_risk, 0.0);
        assert!(r.bias.iter().all(|&b| b == 0.0));
        assert!(r.bound > 0.0 && r.ratio == 0.0);
    }

    #[test]
    fn paired_and_worker_independent() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 1.0);
        let k = UnbiasedKernel::new(WeightFunction::exponential(1.0).unwrap(), m.clone()).unwrap();
        let sim = SimConfig::stationary(2.0, 0.01, 9);
        let ests: [&dyn PathEstimator; 2] = [&Edf, &k];
        let one = empirical_risk_paired(&m, &ests, &NuMeasure::default(), &sim, 8, &grid(), 1).unwrap();
        let four = empirical_risk_paired(&m, &ests, &NuMeasure::default(), &sim, 8, &grid(), 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[0].config.path_seeds, one[1].config.path_seeds);
        assert_eq!(one[0].estimator, "edf");
        assert_eq!(one[1].estimator, "unbiased:exp:delta=1");
    }

    #[test]
    fn point_masses_reduce_to_mse() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 1.0);
        let nu = NuMeasure::PointMasses { atoms: vec![(-1.0, 0.5), (1.0, 2.0)] };
        let xs = [-1.0, 0.0, 1.0];
        let sim = SimConfig::stationary(2.0, 0.01, 1);
        let r = empirical_risk(&m, &Edf, &nu, &sim, 6, &xs, 1).unwrap();
        let mse = |j: usize| {
            let (b, v) = (r.bias[j], r.scaled_variance[j] / r.horizon_t);
            let n = r.replications as f64;
            b * b + v * (n - 1.0) / n
        };
        let expected = r.horizon_t * (0.5 * mse(0) + 2.0 * mse(2));
        assert!((r.scaled_risk - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn validation_and_coverage() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 1.0);
        let sim = SimConfig::stationary(1.0, 0.01, 1);
        match empirical_risk(&m, &Edf, &NuMeasure::default(), &sim, 1, &[1.0, 0.0], 1) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
        let narrow: Vec<f64> = (0..=80).map(|k| -4.0 + 0.1 * k as f64).collect();
        assert!(matches!(empirical_risk(&m, &Edf, &NuMeasure::default(), &sim, 2, &narrow, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn explosions_fail_the_run() {
        // Linear drift with positive sign and a huge step blows up quickly.
        let m = DiffusionModel::with_constant_diffusion("unstable", |x| -x * x * x, 1.0);
        let sim = SimConfig { dt: 0.9, ..SimConfig::stationary(200.0, 0.9, 3) };
        let r = empirical_risk(&m, &Edf, &NuMeasure::default(), &sim, 4, &grid(), 1);
        assert!(matches!(r, Err(Error::Explosion { .. })), "{r:?}");
    }
}
