//! Experiment orchestration and output formatting.

mod cli;
mod config;

pub use cli::cli_main;
pub use config::{ExperimentConfig, GridSpec, ModelField, SimSection, WorkerCount, WORKERS_ENV};

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::efficiency::{empirical_risk_paired, RiskReport};
use crate::error::{Error, Result};
use crate::estimators::{build_estimator, PathEstimator};

/// `v` in scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Everything `run_experiment` produces. `result.json` holds this minus the
/// wall clock, which goes to `timing.json` so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub reports: Vec<RiskReport>,
    /// Output file name of each report, in the same order.
    pub files: Vec<String>,
    #[serde(skip)]
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub workers: usize,
}

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Runs every estimator of `cfg` on common paths and writes `result.json`,
/// one `risk_<tag>.csv` per estimator and `timing.json` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = cfg.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;

    let boxed: Vec<Box<dyn PathEstimator>> =
        plan.estimators.iter().map(|s| build_estimator(s, &plan.model)).collect::<Result<_>>()?;
    let refs: Vec<&dyn PathEstimator> = boxed.iter().map(|b| b.as_ref()).collect();
    let xs = cfg.grid.points();
    let workers = cfg.workers.resolve();
    let reports = empirical_risk_paired(&plan.model, &refs, &cfg.nu, &plan.sim, cfg.replications, &xs, workers)?;

    let files: Vec<String> = plan.estimators.iter().map(|s| format!("risk_{}.csv", s.file_tag())).collect();
    for (report, name) in reports.iter().zip(&files) {
        let path = cfg.output_dir.join(name);
        report.write_csv(create(&path)?)?;
    }
    let result = ExperimentResult {
        version: VERSION.to_string(),
        config: cfg.clone(),
        reports,
        files,
        timing: Timing { wall_seconds: started.elapsed().as_secs_f64(), workers },
    };
    write_json(&cfg.output_dir.join("result.json"), &result)?;
    write_json(&cfg.output_dir.join("timing.json"), &result.timing)?;
    Ok(result)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    use std::io::Write;
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Where output goes when no file is named.
pub(crate) fn sink(path: Option<&PathBuf>) -> Result<Box<dyn std::io::Write>> {
    match path {
        Some(p) => Ok(Box::new(create(p)?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efficiency::NuMeasure;

    fn smoke(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelField::Text("ou".into()),
            estimators: vec!["edf".into(), "unbiased:exp:delta=1".into()],
            sim: SimSection { horizon: 1.0, dt: 0.01, seed: 3 },
            replications: 2,
            nu: NuMeasure::default(),
            grid: GridSpec::default(),
            output_dir: dir.to_path_buf(),
            workers: WorkerCount::Count(1),
        }
    }

    #[test]
    fn smoke_run_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&smoke(dir.path())).unwrap();
        assert_eq!(res.reports.len(), 2);
        assert!(res.reports.iter().all(|r| r.ratio.is_finite()));
        assert_eq!(res.reports[0].config.path_seeds, res.reports[1].config.path_seeds);
        for f in ["risk_edf.csv", "risk_unbiased_exp.csv", "result.json", "timing.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
        assert!(json["reports"][1]["ratio"].is_number());
        assert!(json.get("timing").is_none());
        let csv = std::fs::read_to_string(dir.path().join("risk_edf.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("x,bias,scaled_variance,local_bound"));
        assert_eq!(csv.lines().count(), 1 + 101);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&smoke(a.path())).unwrap();
        let mut cfg = smoke(b.path());
        cfg.output_dir = a.path().to_path_buf();
        let first: Vec<Vec<u8>> =
            ["risk_edf.csv", "risk_unbiased_exp.csv"].iter().map(|f| std::fs::read(a.path().join(f)).unwrap()).collect();
        run_experiment(&cfg).unwrap();
        for (f, bytes) in ["risk_edf.csv", "risk_unbiased_exp.csv"].iter().zip(first) {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), bytes);
        }
    }
}
