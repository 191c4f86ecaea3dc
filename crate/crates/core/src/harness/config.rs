use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::minilang::ExecLimits;
use crate::rewards::{GrpoParams, RewardVariant, ShapingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutorKind {
    #[default]
    Minilang,
    SubprocessAdapter,
}

impl std::str::FromStr for ExecutorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minilang" => Ok(ExecutorKind::Minilang),
            "subprocess-adapter" | "subprocess" => Ok(ExecutorKind::SubprocessAdapter),
            other => Err(format!("unknown executor `{other}` (expected minilang or subprocess-adapter)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutorConfig {
    pub kind: ExecutorKind,
    /// Shim program and arguments for the subprocess adapter.
    pub command: Vec<String>,
    pub timeout_seconds: f64,
    pub pool_size: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            kind: ExecutorKind::Minilang,
            command: Vec::new(),
            timeout_seconds: 10.0,
            pool_size: 1,
        }
    }
}

/// Where the Halstead clip point comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizerSource {
    /// Precomputed 95th-percentile clip point.
    pub d_hat_95: Option<f64>,
    /// Corpus whose reference solutions are used to fit the clip point.
    pub corpus: Option<PathBuf>,
}

/// Correctness targets for the per-problem bound report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundTargets {
    pub q: f64,
    pub q_prime: f64,
    /// Monte Carlo trials per problem; 0 disables the simulation.
    pub sim_trials: u64,
}

impl Default for BoundTargets {
    fn default() -> Self {
        BoundTargets {
            q: 0.7132,
            q_prime: 0.7693,
            sim_trials: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub variant: RewardVariant,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    seed: u64,
    out: Option<PathBuf>,
    executor: ExecutorConfig,
    limits: Option<ExecLimits>,
    rewards: RewardConfig,
    grpo: GrpoParams,
    normalizer: NormalizerSource,
    bounds: BoundTargets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub executor: ExecutorConfig,
    pub limits: ExecLimits,
    pub variant: RewardVariant,
    pub shaping: ShapingParams,
    pub grpo: GrpoParams,
    pub normalizer: NormalizerSource,
    pub bounds: BoundTargets,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("verilab-out"),
            executor: ExecutorConfig::default(),
            limits: ExecLimits::default(),
            variant: RewardVariant::Base,
            shaping: ShapingParams::default(),
            grpo: GrpoParams::default(),
            normalizer: NormalizerSource::default(),
            bounds: BoundTargets::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let shaping = match raw.rewards.alpha {
            Some(a) => ShapingParams::new(a)?,
            None => ShapingParams::default(),
        };
        let limits = match raw.limits {
            Some(l) => ExecLimits::new(l.step_budget, l.call_depth_limit)
                .ok_or_else(|| HarnessError::Config("limits must be positive".into()))?,
            None => ExecLimits::default(),
        };
        let mut normalizer = raw.normalizer;
        normalizer.corpus = normalizer.corpus.map(|p| base_dir.join(p));
        let cfg = RunConfig {
            seed: raw.seed,
            out_dir: raw.out.map(|p| base_dir.join(p)).unwrap_or_else(|| PathBuf::from("verilab-out")),
            executor: raw.executor,
            limits,
            variant: raw.rewards.variant,
            shaping,
            grpo: raw.grpo,
            normalizer,
            bounds: raw.bounds,
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.grpo.validate()?;
        if self.executor.kind == ExecutorKind::SubprocessAdapter {
            if self.executor.command.is_empty() {
                return Err(HarnessError::Config("executor.command is required for the subprocess adapter".into()));
            }
            if self.variant == RewardVariant::Augmented {
                return Err(HarnessError::Config(
                    "the augmented reward needs static metrics, which are only computed for minilang subjects".into(),
                ));
            }
        }
        if !(self.executor.timeout_seconds > 0.0) {
            return Err(HarnessError::Config("executor.timeout_seconds must be positive".into()));
        }
        if self.executor.pool_size == 0 {
            return Err(HarnessError::Config("executor.pool_size must be at least 1".into()));
        }
        if let Some(p) = &self.normalizer.corpus {
            if !p.exists() {
                return Err(HarnessError::Config(format!("normalizer corpus {} does not exist", p.display())));
            }
        }
        if self.normalizer.corpus.is_some() && self.normalizer.d_hat_95.is_some() {
            return Err(HarnessError::Config("set either normalizer.corpus or normalizer.d_hat_95, not both".into()));
        }
        let b = self.bounds;
        if !(0.0..1.0).contains(&b.q) || !(b.q_prime > b.q && b.q_prime < 1.0) {
            return Err(HarnessError::Config(format!("bounds targets need 0 <= q < q' < 1, got q={} q'={}", b.q, b.q_prime)));
        }
        Ok(())
    }
}
