use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RealFn;

/// Family of a [`WeightFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `h(u) = 1 + u^{2p}`
    Polynomial { p: u32 },
    /// `h(u) = e^{δu}`
    Exponential { delta: f64 },
    /// `h(u) = c`
    Constant { c: f64 },
    Custom,
}

/// Positive, continuously differentiable weight `h` of the unbiased estimator.
#[derive(Clone)]
pub struct WeightFunction {
    kind: WeightKind,
    h: RealFn,
    h_prime: RealFn,
    /// Primitive of `1/h` (unit diffusion), when known in closed form.
    unit_primitive: Option<RealFn>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("kind", &self.kind)
            .field("closed_form_primitive", &self.unit_primitive.is_some())
            .finish()
    }
}

impl WeightFunction {
    pub fn polynomial(p: u32) -> Result<Self> {
        if p < 1 {
            return Err(Error::validation(format!("polynomial weight needs p >= 1 (got {p})")));
        }
        let two_p = 2 * p as i32;
        let pf = p as f64;
        Ok(Self {
            kind: WeightKind::Polynomial { p },
            h: Arc::new(move |u: f64| 1.0 + u.powi(two_p)),
            h_prime: Arc::new(move |u: f64| 2.0 * pf * u.powi(two_p - 1)),
            // Only p = 1 has an elementary primitive worth using in a hot loop.
            unit_primitive: (p == 1).then(|| Arc::new(|u: f64| u.atan()) as RealFn),
        })
    }

    pub fn exponential(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::validation(format!("exponential weight needs delta > 0 (got {delta})")));
        }
        Ok(Self {
            kind: WeightKind::Exponential { delta },
            h: Arc::new(move |u: f64| (delta * u).exp()),
            h_prime: Arc::new(move |u: f64| delta * (delta * u).exp()),
            unit_primitive: Some(Arc::new(move |u: f64| -(-delta * u).exp() / delta)),
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::validation(format!("constant weight needs c > 0 (got {c})")));
        }
        Ok(Self {
            kind: WeightKind::Constant { c },
            h: Arc::new(move |_| c),
            h_prime: Arc::new(|_| 0.0),
            unit_primitive: Some(Arc::new(move |u: f64| u / c)),
        })
    }

    /// User-supplied weight; `unit_primitive`, if given, must satisfy `P' = 1/h`.
    pub fn custom<H, D>(h: H, h_prime: D, unit_primitive: Option<RealFn>) -> Self
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { kind: WeightKind::Custom, h: Arc::new(h), h_prime: Arc::new(h_prime), unit_primitive }
    }

    pub fn from_kind(kind: WeightKind) -> Result<Self> {
        match kind {
            WeightKind::Polynomial { p } => Self::polynomial(p),
            WeightKind::Exponential { delta } => Self::exponential(delta),
            WeightKind::Constant { c } => Self::constant(c),
            WeightKind::Custom => Err(Error::validation("custom weights cannot be built from a kind tag")),
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    #[inline]
    pub fn h(&self, u: f64) -> f64 {
        (self.h)(u)
    }

    #[inline]
    pub fn h_prime(&self, u: f64) -> f64 {
        (self.h_prime)(u)
    }

    pub fn unit_primitive(&self) -> Option<&RealFn> {
        self.unit_primitive.as_ref()
    }
}

/// Which estimator to run: `edf` | `unbiased:poly:p=<int>` | `unbiased:exp:delta=<real>` | `unbiased:const:c=<real>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Edf,
    Unbiased(WeightKind),
}

impl EstimatorSpec {
    /// Short name used in output file names, e.g. `risk_unbiased_exp.csv`.
    pub fn file_tag(&self) -> String {
        match self {
            EstimatorSpec::Edf => "edf".into(),
            EstimatorSpec::Unbiased(WeightKind::Polynomial { .. }) => "unbiased_poly".into(),
            EstimatorSpec::Unbiased(WeightKind::Exponential { .. }) => "unbiased_exp".into(),
            EstimatorSpec::Unbiased(WeightKind::Constant { .. }) => "unbiased_const".into(),
            EstimatorSpec::Unbiased(WeightKind::Custom) => "unbiased_custom".into(),
        }
    }
}

fn single_param(text: &str, key: &str) -> Result<String> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected `{key}=<value>`, got `{text}`")))?;
    if k.trim() != key {
        return Err(Error::Parse(format!("expected parameter `{key}`, got `{}`", k.trim())));
    }
    Ok(v.trim().to_string())
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "edf" {
            return Ok(EstimatorSpec::Edf);
        }
        let mut parts = s.splitn(3, ':');
        let (head, family, param) = (parts.next(), parts.next(), parts.next());
        if head != Some("unbiased") {
            return Err(Error::Parse(format!("unknown estimator `{s}`")));
        }
        let kind = match (family, param) {
            (Some("poly"), Some(p)) => {
                let v = single_param(p, "p")?;
                let p: u32 = v.parse().map_err(|_| Error::Parse(format!("p must be a positive integer, got `{v}`")))?;
                WeightKind::Polynomial { p }
            }
            (Some("exp"), Some(p)) => {
                let v = single_param(p, "delta")?;
                WeightKind::Exponential {
                    delta: v.parse().map_err(|_| Error::Parse(format!("delta must be a number, got `{v}`")))?,
                }
            }
            (Some("const"), Some(p)) => {
                let v = single_param(p, "c")?;
                WeightKind::Constant { c: v.parse().map_err(|_| Error::Parse(format!("c must be a number, got `{v}`")))? }
            }
            _ => return Err(Error::Parse(format!("unknown estimator `{s}`"))),
        };
        // Range checks live in the constructors.
        WeightFunction::from_kind(kind)?;
        Ok(EstimatorSpec::Unbiased(kind))
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Edf => write!(f, "edf"),
            EstimatorSpec::Unbiased(WeightKind::Polynomial { p }) => write!(f, "unbiased:poly:p={p}"),
            EstimatorSpec::Unbiased(WeightKind::Exponential { delta }) => write!(f, "unbiased:exp:delta={delta}"),
            EstimatorSpec::Unbiased(WeightKind::Constant { c }) => write!(f, "unbiased:const:c={c}"),
            EstimatorSpec::Unbiased(WeightKind::Custom) => write!(f, "unbiased:custom"),
        }
    }
}

impl Serialize for EstimatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EstimatorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
