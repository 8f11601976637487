use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::efficiency::NuMeasure;
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::model::{DiffusionModel, ModelSpec};
use crate::simulate::SimConfig;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ERGODIC_CDF_WORKERS";

/// A single JSON experiment description.
///
/// ```json
/// { "model": "ou:theta=1,sigma=1",
///   "estimators": ["edf", "unbiased:exp:delta=1"],
///   "sim": { "horizon": 100, "dt": 0.005, "seed": 2024 },
///   "replications": 400,
///   "nu": { "kind": "gaussian", "mean": 0, "sd": 1 },
///   "grid": { "lo": -5, "hi": 5, "count": 101 },
///   "output_dir": "out",
///   "workers": "auto" }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelField,
    /// Estimator spec strings, parsed during validation so every bad one is reported.
    pub estimators: Vec<String>,
    pub sim: SimSection,
    pub replications: usize,
    #[serde(default)]
    pub nu: NuMeasure,
    #[serde(default)]
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: WorkerCount,
}

/// The model either as CLI shorthand or as `{ "family", "params" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelField {
    Text(String),
    Spec(ModelSpec),
}

impl ModelField {
    pub fn spec(&self) -> Result<ModelSpec> {
        match self {
            ModelField::Text(t) => ModelSpec::parse(t),
            ModelField::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Paths always start from the invariant law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// `count` equispaced points on `[lo, hi]`; CLI form `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for GridSpec {
    /// Wide enough that a standard Gaussian `ν` loses under 1e-6 of its mass.
    fn default() -> Self {
        GridSpec { lo: -5.0, hi: 5.0, count: 101 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.count < 2 {
            bad.push(format!("grid count must be >= 2 (got {})", self.count));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            bad.push(format!("grid needs finite lo < hi (got {}:{})", self.lo, self.hi));
        }
        bad
    }

    /// Endpoints are exact; interior points are `lo + k·(hi-lo)/(count-1)`.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count.max(2) - 1;
        (0..=n)
            .map(|k| if k == n { self.hi } else { self.lo + (self.hi - self.lo) * k as f64 / n as f64 })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parse(format!("grid must look like lo:hi:count, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let g = GridSpec {
            lo: parts[0].trim().parse().map_err(|_| bad())?,
            hi: parts[1].trim().parse().map_err(|_| bad())?,
            count: parts[2].trim().parse().map_err(|_| bad())?,
        };
        match g.validate() {
            v if v.is_empty() => Ok(g),
            v => Err(Error::Validation(v)),
        }
    }
}

/// `"auto"` (or absent) defers to the environment, then to one thread per core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorkerCount {
    #[default]
    Auto,
    Count(usize),
}

impl WorkerCount {
    /// Thread count for the risk driver; 0 lets rayon pick.
    pub fn resolve(&self) -> usize {
        match self {
            WorkerCount::Count(n) => *n,
            WorkerCount::Auto => std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0),
        }
    }
}

impl Serialize for WorkerCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WorkerCount::Auto => s.serialize_str("auto"),
            WorkerCount::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for WorkerCount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(0) => Err(serde::de::Error::custom("workers must be >= 1 or \"auto\"")),
            Raw::N(n) => Ok(WorkerCount::Count(n)),
            Raw::S(s) if s == "auto" => Ok(WorkerCount::Auto),
            Raw::S(s) => Err(serde::de::Error::custom(format!("workers must be an integer or \"auto\", got `{s}`"))),
        }
    }
}

/// A validated config, ready to run.
pub(crate) struct Plan {
    pub model: DiffusionModel,
    pub estimators: Vec<EstimatorSpec>,
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks every field and reports all violations at once.
    pub(crate) fn validate(&self) -> Result<Plan> {
        let mut bad = Vec::new();
        let mut absorb = |e: Error| match e {
            Error::Validation(v) => bad.extend(v),
            other => bad.push(other.to_string()),
        };

        let model = self.model.spec().and_then(|s| s.build()).map_err(&mut absorb).ok();

        if self.estimators.is_empty() {
            absorb(Error::validation("estimators: at least one is required"));
        }
        let mut estimators = Vec::new();
        let mut tags = HashSet::new();
        for text in &self.estimators {
            match text.parse::<EstimatorSpec>() {
                Ok(spec) => {
                    if !tags.insert(spec.file_tag()) {
                        absorb(Error::validation(format!(
                            "estimators: `{text}` would overwrite risk_{}.csv",
                            spec.file_tag()
                        )));
                    }
                    estimators.push(spec);
                }
                Err(e) => absorb(Error::validation(format!("estimators: {e}"))),
            }
        }

        let sim = SimConfig::stationary(self.sim.horizon, self.sim.dt, self.sim.seed);
        if let Err(e) = sim.validate() {
            absorb(e);
        }
        if self.replications < 2 {
            absorb(Error::validation(format!("replications must be >= 2 (got {})", self.replications)));
        }
        if let Err(e) = self.nu.validate() {
            absorb(e);
        }
        bad.extend(self.grid.validate());
        if self.output_dir.as_os_str().is_empty() {
            bad.push("output_dir must not be empty".to_string());
        }

        match model {
            Some(model) if bad.is_empty() => Ok(Plan { model, estimators, sim }),
            _ => Err(Error::Validation(bad)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{ "model": "ou:theta=1,sigma=1",
            "estimators": ["edf", "unbiased:exp:delta=1"],
            "sim": { "horizon": 100, "dt": 0.005, "seed": 2024 },
            "replications": 400,
            "nu": { "kind": "gaussian", "mean": 0, "sd": 1 },
            "grid": { "lo": -5, "hi": 5, "count": 101 },
            "output_dir": "out",
            "workers": "auto" }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.workers, WorkerCount::Auto);
        assert!(cfg.validate().is_ok());
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let obj = r#"{ "model": { "family": "ou", "params": { "theta": 2 } }, "estimators": ["edf"],
            "sim": { "horizon": 1, "dt": 0.1, "seed": 0 }, "replications": 2, "output_dir": "o", "workers": 3 }"#;
        let cfg = ExperimentConfig::from_json(obj).unwrap();
        assert_eq!(cfg.workers, WorkerCount::Count(3));
        assert_eq!(cfg.grid, GridSpec::default());
    }

    #[test]
    fn validation_lists_every_violation() {
        let cfg = ExperimentConfig {
            model: ModelField::Text("ou:theta=-1".into()),
            estimators: vec!["edf".into(), "kde".into(), "unbiased:exp:delta=1".into(), "unbiased:exp:delta=2".into()],
            sim: SimSection { horizon: 1e9, dt: 1.0, seed: 0 },
            replications: 1,
            nu: NuMeasure::Gaussian { mean: 0.0, sd: -1.0 },
            grid: GridSpec { lo: 1.0, hi: 0.0, count: 1 },
            output_dir: PathBuf::new(),
            workers: WorkerCount::Auto,
        };
        match cfg.validate() {
            Err(Error::Validation(v)) => assert!(v.len() >= 8, "{v:#?}"),
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("accepted"),
        }
    }

    #[test]
    fn grid_points_and_parse() {
        let g: GridSpec = "-3:3:61".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 61);
        assert_eq!((p[0], p[60]), (-3.0, 3.0));
        assert!((p[31] - 0.1).abs() < 1e-15);
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!(matches!("1:0:5".parse::<GridSpec>(), Err(Error::Validation(_))));
    }

    #[test]
    fn workers_reject_zero() {
        assert!(serde_json::from_str::<WorkerCount>("0").is_err());
        assert!(serde_json::from_str::<WorkerCount>("\"many\"").is_err());
        assert_eq!(serde_json::from_str::<WorkerCount>("4").unwrap().resolve(), 4);
    }
}
