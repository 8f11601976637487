//! Built-in model families and their JSON description.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::DiffusionModel;
use crate::error::{Error, Result};

/// `{ "family": "ou" | "quartic" | "shifted_ou", "params": { ... } }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl std::fmt::Display for ModelSpec {
    /// The CLI shorthand accepted by [`ModelSpec::parse`].
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.family)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl ModelSpec {
    pub fn new(family: impl Into<String>) -> Self {
        Self { family: family.into(), params: BTreeMap::new() }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Parse the CLI shorthand `family[:key=value,...]`, e.g. `ou:theta=2,sigma=0.5`.
    pub fn parse(text: &str) -> Result<Self> {
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f, Some(r)),
            None => (text, None),
        };
        let mut spec = ModelSpec::new(family.trim());
        if let Some(rest) = rest {
            for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("model parameter `{kv}` is not key=value")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("model parameter `{k}` has non-numeric value `{v}`")))?;
                spec.params.insert(k.trim().to_string(), v);
            }
        }
        Ok(spec)
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn build(&self) -> Result<DiffusionModel> {
        let allowed: &[&str] = match self.family.as_str() {
            "ou" => &["theta", "sigma"],
            "quartic" => &[],
            "shifted_ou" => &["mean"],
            other => {
                return Err(Error::validation(format!(
                    "unknown model family `{other}` (expected ou, quartic or shifted_ou)"
                )))
            }
        };
        let unknown: Vec<String> = self
            .params
            .keys()
            .filter(|k| !allowed.contains(&k.as_str()))
            .map(|k| format!("unknown parameter `{k}` for family `{}`", self.family))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Validation(unknown));
        }
        let model = match self.family.as_str() {
            "ou" => {
                let theta = self.get("theta", 1.0);
                let sigma = self.get("sigma", 1.0);
                let mut bad = Vec::new();
                if !(theta > 0.0) {
                    bad.push(format!("ou: theta must be > 0 (got {theta})"));
                }
                if !(sigma > 0.0) {
                    bad.push(format!("ou: sigma must be > 0 (got {sigma})"));
                }
                if !bad.is_empty() {
                    return Err(Error::Validation(bad));
                }
                DiffusionModel::ornstein_uhlenbeck(theta, sigma)
            }
            "quartic" => DiffusionModel::quartic(),
            _ => {
                let mean = self.get("mean", 0.0);
                if !mean.is_finite() {
                    return Err(Error::validation("shifted_ou: mean must be finite"));
                }
                DiffusionModel::shifted_ou(mean)
            }
        };
        Ok(model.with_spec(self.clone()))
    }
}

impl DiffusionModel {
    /// `S(x) = -θx`, `σ = s`; invariant law `N(0, s²/(2θ))`.
    pub fn ornstein_uhlenbeck(theta: f64, sigma: f64) -> Self {
        DiffusionModel::with_constant_diffusion(format!("ou(theta={theta},sigma={sigma})"), move |x| -theta * x, sigma)
            .with_spec(ModelSpec::new("ou").param("theta", theta).param("sigma", sigma))
    }

    /// `S(x) = -x³`, `σ = 1`; invariant density ∝ `exp(-x⁴/2)`.
    pub fn quartic() -> Self {
        DiffusionModel::with_constant_diffusion("quartic", |x| -x * x * x, 1.0).with_spec(ModelSpec::new("quartic"))
    }

    /// `S(x) = -(x - m)`, `σ = 1`.
    pub fn shifted_ou(mean: f64) -> Self {
        DiffusionModel::with_constant_diffusion(format!("shifted_ou(mean={mean})"), move |x| -(x - mean), 1.0)
            .with_spec(ModelSpec::new("shifted_ou").param("mean", mean))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_shorthand() {
        let s = ModelSpec::parse("ou:theta=2,sigma=0.5").unwrap();
        assert_eq!(s.family, "ou");
        assert_eq!(s.params["theta"], 2.0);
        let m = s.build().unwrap();
        assert_eq!(m.drift(1.0), -2.0);
        assert_eq!(m.diffusion(3.0), 0.5);
        assert_eq!(m.constant_diffusion(), Some(0.5));
        assert_eq!(s.to_string(), "ou:sigma=0.5,theta=2");
        assert_eq!(ModelSpec::parse(&s.to_string()).unwrap(), s);
        assert_eq!(ModelSpec::new("quartic").to_string(), "quartic");
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"family":"shifted_ou","params":{"mean":1.5}}"#;
        let s: ModelSpec = serde_json::from_str(json).unwrap();
        let m = s.build().unwrap();
        assert_eq!(m.drift(1.5), 0.0);
        assert_eq!(m.spec().unwrap(), &s);
    }

    #[test]
    fn rejects_unknowns() {
        assert!(matches!(ModelSpec::parse("cir").unwrap().build(), Err(Error::Validation(_))));
        assert!(matches!(ModelSpec::parse("ou:kappa=1").unwrap().build(), Err(Error::Validation(_))));
        match ModelSpec::parse("ou:theta=-1,sigma=0").unwrap().build() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ModelSpec::parse("ou:theta"), Err(Error::Parse(_))));
    }
}
