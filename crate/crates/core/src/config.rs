//! TOML experiment configuration.
//!
//! A config names the experiment, the seed, the chain settings, optional
//! target parameters, a list of named kernels, and optional oracle, mode
//! region, SMC and spectral sections. Parse and validation errors carry
//! the 1-based line of the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ModeRegion, DEFAULT_BINS};
use crate::equivalence::TeleportConfig;
use crate::kernels::KernelSpec;
use crate::targets::{GridAxis, Ma1Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FourState,
    Circle,
    MixtureGaussian,
    ConditionalGaussian,
    Ma1,
    SmcCompare,
    SpectralCurve,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::FourState => "four_state",
            ExperimentKind::Circle => "circle",
            ExperimentKind::MixtureGaussian => "mixture_gaussian",
            ExperimentKind::ConditionalGaussian => "conditional_gaussian",
            ExperimentKind::Ma1 => "ma1",
            ExperimentKind::SmcCompare => "smc_compare",
            ExperimentKind::SpectralCurve => "spectral_curve",
        }
    }
}

/// Target parameters; which fields apply depends on the experiment, and
/// unset fields take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Four-state probabilities `(p00, p01, p10, p11)`.
    pub probs: Option<[f64; 4]>,
    /// Circle half-width `L` and decay `ν`.
    pub l: Option<f64>,
    pub nu: Option<f64>,
    /// Circle discretization for the exact gap report.
    pub cells: Option<usize>,
    pub delta_cells: Option<usize>,
    /// Single-column CSV of observations; simulated when absent.
    pub data_file: Option<PathBuf>,
    pub data_len: Option<usize>,
    pub data_seed: Option<u64>,
    /// Mixture truth `(μ1, μ2, σ1, σ2, p)`.
    pub truth: Option<[f64; 5]>,
    /// Conditional Gaussian dimension and true sum `Σμ`.
    pub k: Option<usize>,
    pub true_sum: Option<f64>,
    /// MA(1) truth and prior.
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub prior: Option<Ma1Prior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedKernel {
    pub name: String,
    pub spec: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub axes: Vec<GridAxis>,
    /// Prebuilt oracle file to load instead of integrating.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub cell_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcSection {
    pub n_particles: usize,
    #[serde(default = "default_stages")]
    pub stages: usize,
    /// Centre and SD of the initial particle cloud; the flat prior is used
    /// when absent.
    #[serde(default)]
    pub init_center: Option<Vec<f64>>,
    #[serde(default = "default_init_sd")]
    pub init_sd: f64,
}

fn default_stages() -> usize {
    20
}

fn default_init_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub a_start: f64,
    pub a_end: f64,
    pub a_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub burn: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "one")]
    pub chains: usize,
    /// Starting point in sampling coordinates; experiment default if unset.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub target: TargetConfig,
    /// Kernels to run; experiment defaults if empty.
    #[serde(default)]
    pub kernels: Vec<NamedKernel>,
    /// Default teleport settings substituted into default kernels.
    #[serde(default)]
    pub teleport: TeleportConfig,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    /// Mode regions; experiment defaults if absent.
    #[serde(default)]
    pub regions: Option<Vec<ModeRegion>>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub smc: Option<SmcSection>,
    #[serde(default)]
    pub spectral: Option<SpectralSection>,
    /// Output directory used when the CLI gets no `--out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_n() -> usize {
    1000
}

fn one() -> usize {
    1
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of byte offset `pos`.
fn line_of(src: &str, pos: usize) -> usize {
    src[..pos.min(src.len())].matches('\n').count() + 1
}

/// First line assigning `key` (as `key =`) or opening table `[key]` /
/// `[[key]]`.
pub fn find_key_line(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let t = l.trim_start();
        let assign = t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='));
        let table = t.trim_start_matches('[').strip_prefix(key).is_some_and(|rest| rest.starts_with(']'));
        assign || table
    })
    .map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, message: format!("{}: {e}", path.display()) })?;
        Self::from_toml(&src).map_err(|e| ConfigError { message: format!("{}: {}", path.display(), e.message), ..e })
    }

    fn validate(&self, src: &str) -> Result<(), ConfigError> {
        let err = |key: &str, message: String| Err(ConfigError { line: find_key_line(src, key), message });
        if self.chains < 1 {
            return err("chains", "chains must be at least 1".into());
        }
        if self.thin < 1 {
            return err("thin", "thin must be at least 1".into());
        }
        if self.bins < 1 {
            return err("bins", "bins must be at least 1".into());
        }
        for k in &self.kernels {
            if let Err(e) = k.spec.validate() {
                return err("kernels", format!("kernel {:?}: {e}", k.name));
            }
        }
        let mut names: Vec<&str> = self.kernels.iter().map(|k| k.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return err("kernels", format!("duplicate kernel name {:?}", w[0]));
        }
        if let Some(o) = &self.oracle {
            if o.axes.is_empty() && o.file.is_none() {
                return err("oracle", "oracle needs axes or a file".into());
            }
            for a in &o.axes {
                if !(a.min.is_finite() && a.max.is_finite() && a.min < a.max && a.count >= 2) {
                    return err("axes", format!("oracle axis {a:?} must be bounded with min < max and count >= 2"));
                }
            }
        }
        if let Some(s) = &self.smc {
            if s.n_particles == 0 || s.stages == 0 {
                return err("smc", "smc needs n_particles > 0 and stages > 0".into());
            }
            if !(s.init_sd > 0.0) {
                return err("init_sd", "init_sd must be > 0".into());
            }
        }
        if let Some(s) = &self.spectral {
            for (key, v) in [("a_start", s.a_start), ("a_end", s.a_end)] {
                if !(v > 0.0 && v < 0.5) {
                    return err(key, format!("{key} = {v} is outside (0, 1/2)"));
                }
            }
            if !(s.a_step > 0.0) || s.a_end < s.a_start {
                return err("a_step", "need a_step > 0 and a_end >= a_start".into());
            }
        }
        if let Some(p) = self.target.probs {
            if p.iter().any(|v| !(*v > 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return err("probs", format!("probs {p:?} must be positive and sum to 1"));
            }
        }
        if matches!(self.experiment, ExperimentKind::SmcCompare) && self.smc.is_none() {
            return err("experiment", "smc_compare needs an [smc] section".into());
        }
        Ok(())
    }
}
