use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numerics::{try_integrate, try_integrate_line, NeumaierSum, QuadratureSpec};

/// Finite measure `ν` weighting the integrated risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NuMeasure {
    Gaussian { mean: f64, sd: f64 },
    /// Uniform probability on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// `Σ w δ_x` over `(x, w)` atoms.
    PointMasses { atoms: Vec<(f64, f64)> },
}

impl Default for NuMeasure {
    fn default() -> Self {
        NuMeasure::Gaussian { mean: 0.0, sd: 1.0 }
    }
}

impl NuMeasure {
    pub fn point_mass(x: f64) -> Self {
        NuMeasure::PointMasses { atoms: vec![(x, 1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match self {
            NuMeasure::Gaussian { mean, sd } => {
                if !mean.is_finite() {
                    bad.push(format!("gaussian mean must be finite (got {mean})"));
                }
                if !(*sd > 0.0 && sd.is_finite()) {
                    bad.push(format!("gaussian sd must be positive (got {sd})"));
                }
            }
            NuMeasure::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    bad.push(format!("uniform needs finite a < b (got [{a}, {b}])"));
                }
            }
            NuMeasure::PointMasses { atoms } => {
                if atoms.is_empty() {
                    bad.push("point masses need at least one atom".into());
                }
                for (x, w) in atoms {
                    if !x.is_finite() || !(*w >= 0.0 && w.is_finite()) {
                        bad.push(format!("atom ({x}, {w}) needs a finite location and weight >= 0"));
                    }
                }
                if !(atoms.iter().map(|a| a.1).sum::<f64>() > 0.0) {
                    bad.push("point masses need positive total weight".into());
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            NuMeasure::Gaussian { .. } | NuMeasure::Uniform { .. } => 1.0,
            NuMeasure::PointMasses { atoms } => atoms.iter().map(|a| a.1).collect::<NeumaierSum>().value(),
        }
    }

    fn normal(mean: f64, sd: f64) -> Result<Normal> {
        Normal::new(mean, sd).map_err(|e| Error::validation(format!("gaussian nu: {e}")))
    }

    /// Lebesgue density, or `None` for atomic measures.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            NuMeasure::Gaussian { mean, sd } => Self::normal(*mean, *sd).ok().map(|n| n.pdf(x)),
            NuMeasure::Uniform { a, b } => Some(if x >= *a && x <= *b { 1.0 / (b - a) } else { 0.0 }),
            NuMeasure::PointMasses { .. } => None,
        }
    }

    /// `ν(ℝ \ [lo, hi])`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        match self {
            NuMeasure::Gaussian { mean, sd } => match Self::normal(*mean, *sd) {
                Ok(n) => n.cdf(lo) + n.sf(hi),
                Err(_) => f64::NAN,
            },
            NuMeasure::Uniform { a, b } => ((lo.min(*b) - a).max(0.0) + (b - hi.max(*a)).max(0.0)) / (b - a),
            NuMeasure::PointMasses { atoms } => atoms.iter().filter(|(x, _)| *x < lo || *x > hi).map(|a| a.1).sum(),
        }
    }

    /// `∫ g dν`: an exact weighted sum for atoms, quadrature against the density otherwise.
    pub fn integrate<G>(&self, mut g: G, spec: &QuadratureSpec) -> Result<f64>
    where
        G: FnMut(f64) -> Result<f64>,
    {
        self.validate()?;
        match self {
            NuMeasure::Gaussian { mean, sd } => {
                let n = Self::normal(*mean, *sd)?;
                // Integrate in standard units so the tail doubling starts at the right scale.
                Ok(try_integrate_line(|u| Ok(g(mean + sd * u)? * n.pdf(mean + sd * u) * sd), spec)?.value)
            }
            NuMeasure::Uniform { a, b } => Ok(try_integrate(&mut g, *a, *b, spec)?.value / (b - a)),
            NuMeasure::PointMasses { atoms } => {
                let mut acc = NeumaierSum::new();
                for &(x, w) in atoms {
                    if w > 0.0 {
                        acc.add(w * g(x)?);
                    }
                }
                Ok(acc.value())
            }
        }
    }

    /// Weights `w_j` with `Σ w_j φ(x_j) ≈ ∫ φ dν` on the grid `xs`.
    ///
    /// Composite Simpson on uniform grids with an odd point count, trapezoid
    /// otherwise. Atoms must sit on grid points and then get their exact mass.
    pub fn grid_weights(&self, xs: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if let NuMeasure::PointMasses { atoms } = self {
            let mut w = vec![0.0; xs.len()];
            for &(x, m) in atoms {
                let j = xs
                    .iter()
                    .position(|&g| (g - x).abs() <= 1e-12 * x.abs().max(1.0))
                    .ok_or_else(|| Error::Precondition(format!("atom at {x} is not a grid point")))?;
                w[j] += m;
            }
            return Ok(w);
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::Precondition("the nu-integral needs at least two grid points".into()));
        }
        let mut rule = vec![0.0; n];
        let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        let uniform = xs.windows(2).all(|p| ((p[1] - p[0]) - h).abs() <= 1e-9 * h);
        if uniform && n % 2 == 1 {
            for (j, r) in rule.iter_mut().enumerate() {
                let c = if j == 0 || j == n - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                *r = c * h / 3.0;
            }
        } else {
            for j in 0..n - 1 {
                let half = 0.5 * (xs[j + 1] - xs[j]);
                rule[j] += half;
                rule[j + 1] += half;
            }
        }
        Ok(rule.iter().zip(xs).map(|(r, &x)| r * self.density(x).unwrap_or(0.0)).collect())
    }
}

impl FromStr for NuMeasure {
    type Err = Error;

    /// `gauss:<mean>,<sd>` | `uniform:<a>,<b>` | `points:<x>=<w>,...`
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("nu spec `{s}` needs the form <kind>:<params>")))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("`{t}` is not a number")));
        let pair = |t: &str| -> Result<(f64, f64)> {
            let (a, b) = t.split_once(',').ok_or_else(|| Error::Parse(format!("expected two comma-separated numbers, got `{t}`")))?;
            Ok((num(a)?, num(b)?))
        };
        let nu = match kind {
            "gauss" | "gaussian" => {
                let (mean, sd) = pair(rest)?;
                NuMeasure::Gaussian { mean, sd }
            }
            "uniform" => {
                let (a, b) = pair(rest)?;
                NuMeasure::Uniform { a, b }
            }
            "points" => {
                let atoms = rest
                    .split(',')
                    .map(|atom| {
                        let (x, w) = atom.split_once('=').ok_or_else(|| Error::Parse(format!("atom `{atom}` needs the form x=w")))?;
                        Ok((num(x)?, num(w)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                NuMeasure::PointMasses { atoms }
            }
            other => return Err(Error::Parse(format!("unknown nu kind `{other}`"))),
        };
        nu.validate()?;
        Ok(nu)
    }
}

impl fmt::Display for NuMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuMeasure::Gaussian { mean, sd } => write!(f, "gauss:{mean},{sd}"),
            NuMeasure::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            NuMeasure::PointMasses { atoms } => {
                let parts: Vec<String> = atoms.iter().map(|(x, w)| format!("{x}={w}")).collect();
                write!(f, "points:{}", parts.join(","))
            }
        }
    }
}
