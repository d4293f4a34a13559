use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{Connectivity, SelectionRule};
use crate::error::{Error, Result};
use crate::image::ImageFormat;
use crate::msd::ScaleGrid;
use crate::noise::SupersetMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Smooth, square root, per-pixel z-score.
    FcpZ,
    /// Smooth, square root, negated multi-scale derivative.
    #[default]
    Msfcp,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcp-z" => Ok(Method::FcpZ),
            "msfcp" => Ok(Method::Msfcp),
            other => Err(Error::Config(format!("unknown method `{other}` (expected fcp-z or msfcp)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::FcpZ => "fcp-z",
            Method::Msfcp => "msfcp",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub catalog: Option<PathBuf>,
    pub envelope: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
}

/// Every parameter of a detection run. Missing JSON fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: ImageFormat,
    pub method: Method,
    pub alpha: f64,
    pub c: f64,
    pub epsilon: f64,
    pub sigma_smooth: f64,
    pub scales: ScaleGrid,
    /// Background Poisson rate for the null simulation; estimated from the
    /// counts when absent.
    pub lambda0: Option<f64>,
    #[serde(rename = "B")]
    pub replicates: usize,
    /// Removal depth for the per-area table; defaults to `min(5000, N/10)`.
    pub a: Option<usize>,
    pub superset: SupersetMethod,
    pub connectivity: Connectivity,
    pub seed: u64,
    pub min_area: usize,
    pub selection: SelectionRule,
    /// Cached null table from `simulate`.
    pub table: Option<PathBuf>,
    pub outputs: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: ImageFormat::AsciiMatrix,
            method: Method::Msfcp,
            alpha: 0.05,
            c: 0.10,
            epsilon: 0.99,
            sigma_smooth: 1.0,
            scales: ScaleGrid::default(),
            lambda0: None,
            replicates: 2000,
            a: None,
            superset: SupersetMethod::Alg2,
            connectivity: Connectivity::Eight,
            seed: 0,
            min_area: 1,
            selection: SelectionRule::FirstCrossing,
            table: None,
            outputs: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("c must lie in (0, 1), got {}", self.c));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.sigma_smooth > 0.0 && self.sigma_smooth.is_finite()) {
            return bad(format!("sigma_smooth must be positive, got {}", self.sigma_smooth));
        }
        if self.replicates == 0 {
            return bad("B must be at least 1".into());
        }
        if let Some(l) = self.lambda0 {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda0 must be >= 0, got {l}"));
            }
        }
        Ok(())
    }

    /// Removal depth for an image of `n` pixels.
    pub fn removal_depth(&self, n: usize) -> usize {
        self.a.unwrap_or_else(|| 5000.min(n / 10))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
