//! Reward calculus for generated unit tests and the group-relative policy
//! objective used to train on it.
//!
//! A response earns `r_syn = +1` when its final fenced code block holds a
//! well-formed test suite, `-1` otherwise. Well-formed responses also earn a
//! functionality reward from executing the suite against the reference
//! solution:
//!
//! | outcome | base   | difficulty-augmented   |
//! |---------|--------|------------------------|
//! | error   | -2.0   | -2.0                   |
//! | failure | -1.5   | -1.0 - (1 - D)         |
//! | passed  | cov    | r_cov(cov) * (1 + D)   |

use serde::{Deserialize, Serialize};

use crate::minilang::{parse_suite, SourceText, Status, SuiteTree};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("functionality reward must be present exactly when syntax is correct")]
    InconsistentInputs,
    #[error("a group needs at least 2 outputs, got {0}")]
    GroupTooSmall(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Contents of the last fenced block, provided nothing but whitespace follows
/// its closing fence.
pub fn extract_final_code_block(text: &str) -> Option<&str> {
    let trimmed = text.trim_end();
    let body_end = trimmed.strip_suffix("```")?.len();
    let open = trimmed[..body_end].rfind("```")?;
    let inner = &trimmed[open + 3..body_end];
    // Drop an info string such as ```minilang.
    let inner = match inner.find('\n') {
        Some(nl) if !inner[..nl].trim().contains(char::is_whitespace) => &inner[nl + 1..],
        _ => inner,
    };
    Some(inner.trim_matches('\n'))
}

/// A model response and the code extracted from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseArtifact {
    pub raw_text: String,
    pub extracted_code: Option<SourceText>,
}

impl ResponseArtifact {
    pub fn new(raw_text: impl Into<String>, origin_id: &str) -> Self {
        let raw_text = raw_text.into();
        let extracted_code =
            extract_final_code_block(&raw_text).and_then(|code| SourceText::new(code, origin_id));
        ResponseArtifact {
            raw_text,
            extracted_code,
        }
    }
}

/// Structural check for the active executor.
pub trait SyntaxCheck {
    type Suite;

    fn check(&self, code: &SourceText) -> Option<Self::Suite>;
}

/// Accepts sources that parse and declare exactly one MiniLang `suite`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MiniLangSyntax;

impl SyntaxCheck for MiniLangSyntax {
    type Suite = SuiteTree;

    fn check(&self, code: &SourceText) -> Option<SuiteTree> {
        parse_suite(code).ok()
    }
}

/// `(+1, suite)` when extraction and the structural check both succeed.
pub fn syntax_reward<C: SyntaxCheck>(resp: &ResponseArtifact, checker: &C) -> (f64, Option<C::Suite>) {
    match resp.extracted_code.as_ref().and_then(|code| checker.check(code)) {
        Some(suite) => (1.0, Some(suite)),
        None => (-1.0, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingParams {
    pub alpha: f64,
}

impl ShapingParams {
    pub fn new(alpha: f64) -> Result<Self, RewardError> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(ShapingParams { alpha })
        } else {
            Err(RewardError::InvalidParam(format!("alpha must be positive, got {alpha}")))
        }
    }
}

impl Default for ShapingParams {
    fn default() -> Self {
        ShapingParams { alpha: 3.0 }
    }
}

/// `(exp(alpha * cov) - 1) / (exp(alpha) - 1)`; tends to `cov` as alpha -> 0.
pub fn shaped_coverage_reward(cov: f64, params: ShapingParams) -> f64 {
    let a = params.alpha;
    if a < 1e-9 {
        return cov;
    }
    // exp_m1 keeps precision for small alpha.
    (a * cov).exp_m1() / a.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeClass {
    Error,
    Failure,
    Passed { cov: f64 },
}

impl OutcomeClass {
    pub fn from_status(status: Status, cov: f64) -> Self {
        match status {
            Status::Error => OutcomeClass::Error,
            Status::Failure => OutcomeClass::Failure,
            Status::Pass => OutcomeClass::Passed { cov },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OutcomeClass::Error => "error",
            OutcomeClass::Failure => "failure",
            OutcomeClass::Passed { .. } => "passed",
        }
    }
}

pub const ERROR_REWARD: f64 = -2.0;
pub const FAILURE_REWARD: f64 = -1.5;

pub fn functionality_reward_base(outcome: OutcomeClass) -> f64 {
    match outcome {
        OutcomeClass::Error => ERROR_REWARD,
        OutcomeClass::Failure => FAILURE_REWARD,
        OutcomeClass::Passed { cov } => cov,
    }
}

/// Difficulty-aware reward: harder samples soften failure penalties and
/// scale up shaped coverage on success.
pub fn functionality_reward_augmented(outcome: OutcomeClass, params: ShapingParams, difficulty: f64) -> f64 {
    match outcome {
        OutcomeClass::Error => ERROR_REWARD,
        OutcomeClass::Failure => -1.0 - (1.0 - difficulty),
        OutcomeClass::Passed { cov } => shaped_coverage_reward(cov, params) * (1.0 + difficulty),
    }
}

pub fn total_reward(r_syn: f64, r_func: Option<f64>) -> Result<f64, RewardError> {
    match (r_syn > 0.0, r_func) {
        (false, None) => Ok(r_syn),
        (true, Some(f)) => Ok(r_syn + f),
        _ => Err(RewardError::InconsistentInputs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    #[default]
    Base,
    Augmented,
}

impl std::str::FromStr for RewardVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(RewardVariant::Base),
            "augmented" => Ok(RewardVariant::Augmented),
            other => Err(format!("unknown reward variant `{other}` (expected base or augmented)")),
        }
    }
}

/// Reward components for one response; serializes to the report schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_syn: f64,
    pub r_func: Option<f64>,
    /// Shaped coverage term, present for passing augmented responses.
    #[serde(skip)]
    pub r_cov_term: Option<f64>,
    pub total: f64,
    pub outcome: Option<&'static str>,
    pub coverage: Option<f64>,
    #[serde(rename = "difficulty_D")]
    pub difficulty: Option<f64>,
}

impl RewardBreakdown {
    pub fn syntax_failure() -> Self {
        RewardBreakdown {
            r_syn: -1.0,
            r_func: None,
            r_cov_term: None,
            total: -1.0,
            outcome: None,
            coverage: None,
            difficulty: None,
        }
    }

    /// Breakdown for a well-formed response whose suite ran with `outcome`.
    /// `difficulty` is required for the augmented variant.
    pub fn scored(
        outcome: OutcomeClass,
        variant: RewardVariant,
        params: ShapingParams,
        difficulty: Option<f64>,
    ) -> Result<Self, RewardError> {
        let (r_func, r_cov_term) = match variant {
            RewardVariant::Base => (functionality_reward_base(outcome), None),
            RewardVariant::Augmented => {
                let d = difficulty.ok_or_else(|| {
                    RewardError::InvalidParam("augmented reward needs a difficulty".into())
                })?;
                let shaped = match outcome {
                    OutcomeClass::Passed { cov } => Some(shaped_coverage_reward(cov, params)),
                    _ => None,
                };
                (functionality_reward_augmented(outcome, params, d), shaped)
            }
        };
        Ok(RewardBreakdown {
            r_syn: 1.0,
            r_func: Some(r_func),
            r_cov_term,
            total: total_reward(1.0, Some(r_func))?,
            outcome: Some(outcome.label()),
            coverage: match outcome {
                OutcomeClass::Passed { cov } => Some(cov),
                _ => None,
            },
            difficulty,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoParams {
    pub clip_eps: f64,
    pub kl_coeff: f64,
    pub group_size: usize,
    pub sigma_floor: f64,
}

impl Default for GrpoParams {
    fn default() -> Self {
        GrpoParams {
            clip_eps: 0.2,
            kl_coeff: 0.001,
            group_size: 8,
            sigma_floor: 1e-8,
        }
    }
}

impl GrpoParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(RewardError::InvalidParam(format!("clip_eps {} not in (0, 1)", self.clip_eps)));
        }
        if !(self.kl_coeff >= 0.0) {
            return Err(RewardError::InvalidParam(format!("kl_coeff {} is negative", self.kl_coeff)));
        }
        if self.group_size < 2 {
            return Err(RewardError::GroupTooSmall(self.group_size));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(RewardError::InvalidParam("sigma_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Standardizes rewards within a group with the population deviation.
/// Groups with deviation below `sigma_floor` get all-zero advantages.
pub fn group_advantages(rewards: &[f64], sigma_floor: f64) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma < sigma_floor {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / sigma).collect())
}

/// Per-token log-probabilities of one output under the three policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub logp_new: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl PolicyTrace {
    pub fn validate(&self) -> Result<(), RewardError> {
        let n = self.logp_new.len();
        if self.logp_old.len() != n || self.logp_ref.len() != n {
            return Err(RewardError::LengthMismatch(format!(
                "new/old/ref token counts {}/{}/{}",
                n,
                self.logp_old.len(),
                self.logp_ref.len()
            )));
        }
        if n == 0 {
            return Err(RewardError::LengthMismatch("trace has no tokens".into()));
        }
        Ok(())
    }
}

/// Token mean of `exp(x) - x - 1` with `x = logp_ref - logp_new`.
pub fn kl_estimate(logp_new: &[f64], logp_ref: &[f64]) -> Result<f64, RewardError> {
    if logp_new.len() != logp_ref.len() {
        return Err(RewardError::LengthMismatch(format!(
            "{} new vs {} reference tokens",
            logp_new.len(),
            logp_ref.len()
        )));
    }
    if logp_new.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = logp_new
        .iter()
        .zip(logp_ref)
        .map(|(new, reference)| {
            let x = reference - new;
            // exp_m1(x) - x is exact near 0 and never negative.
            (x.exp_m1() - x).max(0.0)
        })
        .sum();
    Ok(sum / logp_new.len() as f64)
}

/// Clipped surrogate minus the KL penalty, averaged over tokens and then
/// over the group. The advantage of each output is broadcast to its tokens.
pub fn grpo_objective(traces: &[PolicyTrace], advantages: &[f64], params: &GrpoParams) -> Result<f64, RewardError> {
    if traces.len() < 2 {
        return Err(RewardError::GroupTooSmall(traces.len()));
    }
    if traces.len() != advantages.len() {
        return Err(RewardError::LengthMismatch(format!(
            "{} traces vs {} advantages",
            traces.len(),
            advantages.len()
        )));
    }
    let (lo, hi) = (1.0 - params.clip_eps, 1.0 + params.clip_eps);
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (trace, &adv) in traces.iter().zip(advantages) {
        trace.validate()?;
        let per_token: f64 = trace
            .logp_new
            .iter()
            .zip(&trace.logp_old)
            .map(|(new, old)| {
                let ratio = (new - old).exp();
                (ratio * adv).min(ratio.clamp(lo, hi) * adv)
            })
            .sum();
        surrogate += per_token / trace.logp_new.len() as f64;
        kl += kl_estimate(&trace.logp_new, &trace.logp_ref)?;
    }
    let g = traces.len() as f64;
    Ok(surrogate / g - params.kl_coeff * kl / g)
}
