//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [model]
//! d = 1
//! alpha = 0.5
//! beta = 0.26
//!
//! [run]
//! master_seed = 7
//! replicas = 10000
//! boxes = [16, 32, 64]
//! ```

use std::path::{Path, PathBuf};

use lrp_core::kernel::{KernelSpec, Norm};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    #[default]
    Sup,
    Euclidean,
}

impl From<NormName> for Norm {
    fn from(n: NormName) -> Self {
        match n {
            NormName::Sup => Norm::Sup,
            NormName::Euclidean => Norm::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Initial `[beta_low, beta_high]` for `betac` and `exponents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_bracket: Option<[f64; 2]>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub norm: NormName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub replicas: u64,
    #[serde(default)]
    pub boxes: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SampleOptions {
    #[serde(default)]
    pub replica: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TailOptions {
    /// Defaults to dyadic thresholds up to `|Lambda_n|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<u64>>,
    /// Double the largest box until the tail stops moving, up to this radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable_up_to: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PhiScanOptions {
    /// Defaults to `[model.beta]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetacOptions {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Replica cap for steps near the crossing; defaults to 8 x `run.replicas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_replicas: Option<u64>,
    #[serde(default = "yes")]
    pub two_sizes: bool,
    /// Level for the crossing-fraction cross-check at the bracket ends.
    #[serde(default = "default_crossing_eps")]
    pub crossing_eps: f64,
}

impl Default for BetacOptions {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), max_replicas: None, two_sizes: true, crossing_eps: default_crossing_eps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessOptions {
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
}

impl Default for TightnessOptions {
    fn default() -> Self {
        Self { multipliers: default_multipliers() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentOptions {
    /// Box radius for bisection (also run at twice this radius).
    #[serde(default = "default_bisection_radius")]
    pub bisection_radius: u32,
    #[serde(default = "default_bisection_replicas")]
    pub bisection_replicas: u64,
    #[serde(default = "default_exponent_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_replicas: Option<u64>,
    /// Radius of the phi profile used for the averaging check.
    #[serde(default = "default_phi_radius")]
    pub phi_radius: u32,
    /// Number of smallest boxes left out of every fit window.
    #[serde(default = "two")]
    pub skip_smallest: usize,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        Self {
            bisection_radius: default_bisection_radius(),
            bisection_replicas: default_bisection_replicas(),
            tolerance: default_exponent_tolerance(),
            max_replicas: None,
            phi_radius: default_phi_radius(),
            skip_smallest: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckOptions {
    #[serde(default = "default_oracle_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_oracle_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "one_u32")]
    pub radius: u32,
}

impl Default for OracleCheckOptions {
    fn default() -> Self {
        Self { betas: default_oracle_betas(), alphas: default_oracle_alphas(), radius: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub sample: SampleOptions,
    #[serde(default)]
    pub tail: TailOptions,
    #[serde(default)]
    pub phi_scan: PhiScanOptions,
    #[serde(default)]
    pub betac: BetacOptions,
    #[serde(default)]
    pub tightness: TightnessOptions,
    #[serde(default)]
    pub exponents: ExponentOptions,
    #[serde(default)]
    pub oracle_check: OracleCheckOptions,
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn default_tolerance() -> f64 {
    0.02
}
fn default_crossing_eps() -> f64 {
    0.1
}
fn default_multipliers() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn default_bisection_radius() -> u32 {
    512
}
fn default_bisection_replicas() -> u64 {
    1000
}
fn default_exponent_tolerance() -> f64 {
    0.01
}
fn default_phi_radius() -> u32 {
    64
}
fn default_oracle_betas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_oracle_alphas() -> Vec<f64> {
    vec![0.3, 0.5, 0.8]
}

/// Subcommands, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    TwoPoint,
    Tail,
    PhiScan,
    Betac,
    Isoperimetry,
    Exponents,
    Tightness,
    OracleCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::TwoPoint => "twopoint",
            Self::Tail => "tail",
            Self::PhiScan => "phi-scan",
            Self::Betac => "betac",
            Self::Isoperimetry => "isoperimetry",
            Self::Exponents => "exponents",
            Self::Tightness => "tightness",
            Self::OracleCheck => "oracle-check",
        }
    }
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Model with `beta` taken from the config (0 if absent).
    pub fn spec(&self) -> LabResult<KernelSpec> {
        self.spec_at(self.model.beta.unwrap_or(0.0))
    }

    pub fn spec_at(&self, beta: f64) -> LabResult<KernelSpec> {
        let spec = KernelSpec { d: self.model.d, alpha: self.model.alpha, beta, amplitude: self.model.amplitude, norm: self.model.norm.into() };
        spec.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(spec)
    }

    pub fn beta(&self) -> LabResult<f64> {
        self.model.beta.ok_or_else(|| config_err("model.beta is required for this subcommand"))
    }

    pub fn largest_box(&self) -> LabResult<u32> {
        self.run.boxes.iter().copied().max().ok_or_else(|| config_err("run.boxes must list at least one radius"))
    }

    /// Checks everything `command` needs before any sampling starts.
    pub fn validate(&self, command: Command) -> LabResult<()> {
        self.spec()?;
        if self.run.replicas < 2 {
            return Err(config_err("run.replicas must be at least 2"));
        }
        let needs_boxes = !matches!(command, Command::Betac | Command::OracleCheck);
        if needs_boxes && self.run.boxes.is_empty() {
            return Err(config_err("run.boxes must list at least one radius"));
        }
        let needs_beta = matches!(command, Command::Sample | Command::TwoPoint | Command::Tail | Command::Isoperimetry | Command::Tightness)
            || (command == Command::PhiScan && self.phi_scan.betas.is_none());
        if needs_beta {
            self.beta()?;
        }
        match command {
            Command::Betac | Command::Exponents => {
                self.spec()?.require_finite_critical_point().map_err(|e| config_err(e.to_string()))?;
                let [lo, hi] = self.model.beta_bracket.ok_or_else(|| config_err("model.beta_bracket = [low, high] is required for this subcommand"))?;
                if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                    return Err(config_err(format!("model.beta_bracket must satisfy 0 <= low < high, got [{lo}, {hi}]")));
                }
                let tol = if command == Command::Betac { self.betac.tolerance } else { self.exponents.tolerance };
                if !(tol > 0.0) {
                    return Err(config_err("bisection tolerance must be positive"));
                }
                if command == Command::Betac && self.run.boxes.first().is_none_or(|&n| n == 0) {
                    return Err(config_err("betac needs run.boxes[0] >= 1 as the bisection radius"));
                }
                if command == Command::Exponents {
                    let usable = self.run.boxes.len().saturating_sub(self.exponents.skip_smallest);
                    if usable < 2 {
                        return Err(config_err("exponents needs at least two boxes beyond the skipped smallest ones"));
                    }
                    if self.exponents.bisection_radius == 0 || self.exponents.phi_radius < 2 {
                        return Err(config_err("exponents needs bisection_radius >= 1 and phi_radius >= 2"));
                    }
                }
            }
            Command::PhiScan | Command::TwoPoint | Command::Tail | Command::Tightness if self.run.boxes.contains(&0) => {
                return Err(config_err("box radii must be at least 1 for this subcommand"));
            }
            Command::Tightness => {
                if let Some(a) = self.tightness.multipliers.iter().find(|&&a| !(a >= 1.0)) {
                    return Err(config_err(format!("tightness multipliers must be >= 1, got {a}")));
                }
            }
            Command::OracleCheck => {
                for &a in &self.oracle_check.alphas {
                    KernelSpec::new(self.model.d, a, 1.0).map_err(|e| config_err(e.to_string()))?;
                }
                if let Some(b) = self.oracle_check.betas.iter().find(|&&b| !(b >= 0.0 && b.is_finite())) {
                    return Err(config_err(format!("oracle_check.betas must be non-negative, got {b}")));
                }
            }
            _ => {}
        }
        if let Some(betas) = &self.phi_scan.betas {
            if let Some(b) = betas.iter().find(|&&b| !(b >= 0.0 && b.is_finite())) {
                return Err(config_err(format!("phi_scan.betas must be non-negative, got {b}")));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the config (seed included).
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
