use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use super::{create, fmt_f64, run_experiment, sink, ExperimentConfig, GridSpec, WorkerCount};
use crate::efficiency::{
    check_q2, check_q3, efficiency_bound, local_variance, m_closed, m_direct, m_func, m_func_combined, ode_residual,
    representation_terms, NuMeasure,
};
use crate::error::{Error, Result};
use crate::estimators::{build_estimator, check_cond1, estimate_curve, EstimatorSpec, UnbiasedKernel, WeightFunction};
use crate::model::{DiffusionModel, ModelSpec};
use crate::simulate::{simulate_path, SimConfig};

#[derive(Parser)]
#[command(name = "ergodic-cdf", version, about = "Invariant distribution estimation for ergodic diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ergodicity screen of a model, as JSON.
    CheckModel {
        #[command(flatten)]
        model: ModelArg,
        /// Inner probe radius; outer probes go out to 64 times it.
        #[arg(long, default_value_t = 8.0)]
        probe_radius: f64,
    },
    /// Invariant distribution and density on a grid, CSV `x,F,f`.
    Truth {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true, default_value = "-5:5:101")]
        grid: GridSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One Euler-Maruyama path, CSV `t,x[,dW]`.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Store the Wiener increments as a third column.
        #[arg(long)]
        wiener: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// An estimator on one simulated path, CSV `x,estimate`.
    Estimate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "edf")]
        estimator: EstimatorSpec,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, allow_hyphen_values = true, default_value = "-5:5:101")]
        grid: GridSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The efficiency bound as JSON, with R(x,x) per grid point.
    Bound {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "gauss:0,1", allow_hyphen_values = true)]
        nu: NuMeasure,
        #[arg(long, allow_hyphen_values = true, default_value = "-5:5:101")]
        grid: GridSpec,
        /// Also write `x,local_bound` here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Moment and boundary condition screens, as JSON.
    CheckConditions {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "gauss:0,1", allow_hyphen_values = true)]
        nu: NuMeasure,
        /// Unbiased estimator(s) to screen; repeat the flag for several.
        #[arg(long = "estimator", default_value = "unbiased:exp:delta=1")]
        estimators: Vec<EstimatorSpec>,
        /// Thresholds for the per-x screen.
        #[arg(long = "x", allow_hyphen_values = true, value_delimiter = ',', default_value = "-1,0,1")]
        xs: Vec<f64>,
    },
    /// Risk experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config and the environment.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Residuals of the identities behind the martingale representation, as JSON.
    IdentityChecks {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "unbiased:exp:delta=1")]
        estimator: EstimatorSpec,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        x: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ModelArg {
    /// `ou[:theta=..,sigma=..]`, `quartic` or `shifted_ou[:mean=..]`.
    #[arg(long, default_value = "ou")]
    model: String,
}

impl ModelArg {
    fn build(&self) -> Result<DiffusionModel> {
        ModelSpec::parse(&self.model)?.build()
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start here instead of from the invariant law.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        match self.x0 {
            Some(x0) => SimConfig::fixed(self.horizon, self.dt, self.seed, x0),
            None => SimConfig::stationary(self.horizon, self.dt, self.seed),
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code:
/// 0 success, 2 validation, 3 numerical divergence, 4 simulation explosion, 1 i/o.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("stdout", e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::CheckModel { model, probe_radius } => {
            let m = model.build()?;
            let report = m.check_ergodicity(probe_radius);
            print_json(&json!({ "model": model.model, "all_ok": report.all_ok(), "report": report }))
        }
        Command::Truth { model, grid, out } => {
            let law = model.build()?.law()?;
            let mut w = csv::Writer::from_writer(sink(out.as_ref())?);
            let io = |e: csv::Error| Error::io("truth csv", e);
            w.write_record(["x", "F", "f"]).map_err(io)?;
            for x in grid.points() {
                w.write_record([fmt_f64(x), fmt_f64(law.cdf(x)), fmt_f64(law.density(x))]).map_err(io)?;
            }
            w.flush().map_err(|e| Error::io("truth csv", e))
        }
        Command::Simulate { model, sim, wiener, out } => {
            let mut cfg = sim.config();
            if wiener {
                cfg = cfg.with_wiener();
            }
            simulate_path(&model.build()?, &cfg)?.write_csv(sink(out.as_ref())?)
        }
        Command::Estimate { model, estimator, sim, grid, out } => {
            let m = model.build()?;
            let est = build_estimator(&estimator, &m)?;
            let path = simulate_path(&m, &sim.config())?;
            estimate_curve(&path, &grid.points(), est.as_ref())?.write_csv(sink(out.as_ref())?)
        }
        Command::Bound { model, nu, grid, csv } => {
            nu.validate()?;
            let m = model.build()?;
            let bound = efficiency_bound(&m, &nu)?;
            let xs = grid.points();
            let local = xs.iter().map(|&x| local_variance(&m, x)).collect::<Result<Vec<_>>>()?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_writer(create(&path)?);
                let io = |e: csv::Error| Error::io(&path, e);
                w.write_record(["x", "local_bound"]).map_err(io)?;
                for (x, r) in xs.iter().zip(&local) {
                    w.write_record([fmt_f64(*x), fmt_f64(*r)]).map_err(io)?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            print_json(&json!({ "model": model.model, "nu": nu.to_string(), "bound": bound, "xs": xs, "local_bound": local }))
        }
        Command::CheckConditions { model, nu, estimators, xs } => {
            nu.validate()?;
            let m = model.build()?;
            let kernels = unbiased_kernels(&estimators, &m)?;
            let q2 = check_q2(&m, &nu);
            let per_estimator: Vec<_> = estimators
                .iter()
                .zip(&kernels)
                .map(|(spec, k)| {
                    let cond1: Vec<_> = xs.iter().map(|&x| check_cond1(k, x)).collect();
                    json!({
                        "estimator": spec.to_string(),
                        "cond1_ok": cond1.iter().all(|r| r.all_ok()),
                        "cond1": cond1,
                        "q3": check_q3(k, &nu),
                    })
                })
                .collect();
            print_json(&json!({ "model": model.model, "nu": nu.to_string(), "q2": q2, "estimators": per_estimator }))
        }
        Command::Experiment { config, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(n) = workers {
                if n == 0 {
                    return Err(Error::validation("--workers must be >= 1"));
                }
                cfg.workers = WorkerCount::Count(n);
            }
            let result = run_experiment(&cfg)?;
            let summary: Vec<_> = result
                .reports
                .iter()
                .zip(&result.files)
                .map(|(r, f)| json!({ "estimator": r.estimator, "file": f, "scaled_risk": r.scaled_risk, "bound": r.bound, "ratio": r.ratio }))
                .collect();
            print_json(&json!({ "output_dir": cfg.output_dir, "reports": summary }))
        }
        Command::IdentityChecks { model, estimator, x, horizon, dt, seed } => {
            let m = model.build()?;
            let k = unbiased_kernels(&[estimator], &m)?.remove(0);
            let m_rows = (0..=12)
                .map(|i| {
                    let z = -3.0 + 0.5 * i as f64;
                    let (closed, direct) = (m_closed(&k, x, z)?, m_direct(&k, x, z)?);
                    let rel = (closed - direct).abs() / closed.abs().max(1e-300);
                    Ok(json!({ "z": z, "closed": closed, "direct": direct, "rel_diff": rel }))
                })
                .collect::<Result<Vec<_>>>()?;
            let probes: Vec<f64> = (0..20).map(|i| -2.85 + 0.3 * i as f64).collect();
            let regroup = probes
                .iter()
                .map(|&y| {
                    let (split, joint) = (m_func(&k, x, y)?, m_func_combined(&k, x, y)?);
                    Ok(json!({ "y": y, "g_plus_h": split, "combined": joint, "abs_diff": (split - joint).abs() }))
                })
                .collect::<Result<Vec<_>>>()?;
            let ode = probes
                .iter()
                .map(|&y| Ok(json!({ "y": y, "residual": ode_residual(&k, x, y, 1e-4)? })))
                .collect::<Result<Vec<_>>>()?;
            let path = simulate_path(&m, &SimConfig::stationary(horizon, dt, seed).with_wiener())?;
            let terms = representation_terms(&path, &k, x)?;
            print_json(&json!({
                "model": model.model,
                "estimator": estimator.to_string(),
                "x": x,
                "m": m_rows,
                "regrouping": regroup,
                "ode": ode,
                "representation": {
                    "horizon": horizon, "dt": dt, "seed": seed,
                    "lhs": terms.lhs, "boundary": terms.boundary, "martingale": terms.martingale,
                    "discrepancy": terms.discrepancy(),
                },
            }))
        }
    }
}

fn unbiased_kernels(specs: &[EstimatorSpec], model: &DiffusionModel) -> Result<Vec<UnbiasedKernel>> {
    specs
        .iter()
        .map(|s| match s {
            EstimatorSpec::Unbiased(kind) => UnbiasedKernel::new(WeightFunction::from_kind(*kind)?, model.clone()),
            EstimatorSpec::Edf => Err(Error::validation("this subcommand needs an unbiased estimator, not edf")),
        })
        .collect()
}
