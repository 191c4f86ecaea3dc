//! Majority-vote selection over a pass matrix and the reliability theory
//! behind it.
//!
//! Model: each of `N` candidates is run against `M` independent suites of
//! `K` assertions. A single assertion is valid on correct code with
//! probability `p`, and catches a defect with probability `p * c` where `c`
//! is the average branch coverage. A whole suite therefore passes a correct
//! candidate with probability `alpha_c = p^K` and a wrong one with
//! `alpha_w = (1 - p c)^K`. Hoeffding on the pass-count gap of each wrong
//! candidate plus a union bound over the `W N` wrong candidates gives
//!
//! ```text
//! P(wrong pick) <= W N exp(-M (alpha_c - alpha_w)^2 / 2)
//! ```
//!
//! which at `K = 1` turns into a minimal assertion reliability `p_min` and,
//! inverted, a minimal suite count `M`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("pass matrix must be non-empty and rectangular")]
    BadMatrix,
    #[error("target correctness q' = {q_prime} must exceed prior q = {q}")]
    InvalidTargets { q: f64, q_prime: f64 },
    #[error("margin (1 + c) p - 1 = {0} is not positive; no finite suite count suffices")]
    MarginNonpositive(f64),
    #[error("simulation needs at least one correct and one wrong candidate ({correct} correct, {wrong} wrong)")]
    DegenerateConfig { correct: usize, wrong: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Binary results: row `i` is a candidate, column `j` a suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct PassMatrix {
    rows: Vec<Vec<bool>>,
}

impl PassMatrix {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self, BoundsError> {
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(BoundsError::BadMatrix);
        }
        Ok(PassMatrix { rows })
    }

    pub fn candidates(&self) -> usize {
        self.rows.len()
    }

    pub fn suites(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, candidate: usize, suite: usize) -> bool {
        self.rows[candidate][suite]
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.iter().filter(|&&x| x).count()).collect()
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }
}

impl TryFrom<Vec<Vec<u8>>> for PassMatrix {
    type Error = BoundsError;

    fn try_from(v: Vec<Vec<u8>>) -> Result<Self, Self::Error> {
        let rows = v
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|x| match x {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(BoundsError::BadMatrix),
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        PassMatrix::new(rows)
    }
}

impl From<PassMatrix> for Vec<Vec<u8>> {
    fn from(m: PassMatrix) -> Self {
        m.rows
            .into_iter()
            .map(|r| r.into_iter().map(u8::from).collect())
            .collect()
    }
}

/// Index of the row with the most passes, lowest index on ties.
pub fn majority_select(m: &PassMatrix) -> usize {
    argmax_first(&m.row_sums())
}

fn argmax_first(scores: &[usize]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Probability a candidate is correct after it passes one test.
/// Coverage is clamped to `[0, 1]`; impossible evidence yields 0.
pub fn posterior_correct(q: f64, p: f64, c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    let num = q * p;
    let den = num + (1.0 - q) * (1.0 - p * c);
    if den <= 0.0 {
        return 0.0;
    }
    num / den
}

/// Passing a test raises confidence exactly when `p > 1 / (1 + c)`.
pub fn single_test_threshold(c: f64) -> f64 {
    1.0 / (1.0 + c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteModel {
    pub alpha_c: f64,
    pub alpha_w: f64,
}

impl SuiteModel {
    pub fn margin(&self) -> f64 {
        self.alpha_c - self.alpha_w
    }
}

pub fn suite_pass_probs(p: f64, c: f64, k: u32) -> SuiteModel {
    let k = k as i32;
    SuiteModel {
        alpha_c: p.powi(k),
        alpha_w: (1.0 - p * c).powi(k),
    }
}

/// Hoeffding tail for one wrong candidate tying or beating the correct one.
pub fn hoeffding_beta(m: u32, margin: f64) -> f64 {
    (-(m as f64) * margin * margin / 2.0).exp()
}

/// Union bound on picking a wrong candidate, capped at 1.
pub fn wrong_selection_bound(n: u32, w: f64, m: u32, margin: f64) -> f64 {
    (w * n as f64 * hoeffding_beta(m, margin)).min(1.0)
}

/// Which closed form to use for the minimal margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginForm {
    /// `sqrt(2 ln(WN / delta) / M)`, the exact inverse of the union bound.
    #[default]
    Hoeffding,
    /// `sqrt(ln(WN / delta) / (2 M))`, four times smaller under the root.
    /// Kept for comparison only; it does not guarantee the union bound.
    SafetyMargin,
}

/// Smallest margin for which the union bound is at most `delta`; 0 when
/// `W N <= delta` makes the bound hold vacuously.
pub fn required_margin(n: u32, w: f64, m: u32, delta: f64, form: MarginForm) -> f64 {
    let wn = w * n as f64;
    if wn <= delta {
        return 0.0;
    }
    let log = (wn / delta).ln();
    match form {
        MarginForm::Hoeffding => (2.0 * log / m as f64).sqrt(),
        MarginForm::SafetyMargin => (log / (2.0 * m as f64)).sqrt(),
    }
}

/// `ln(N (1 - q) / (1 - q'))`, the log term shared by the two operational bounds.
fn target_log(q: f64, q_prime: f64, n: u32) -> Result<f64, BoundsError> {
    if !(q_prime > q) || !(0.0..=1.0).contains(&q) || !(q_prime < 1.0) {
        return Err(BoundsError::InvalidTargets { q, q_prime });
    }
    Ok(((1.0 - q) / (1.0 - q_prime) * n as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinReliability {
    /// Capped at 1.
    pub p_min: f64,
    /// The uncapped value.
    pub raw: f64,
    pub feasible: bool,
}

/// Minimal per-assertion reliability for post-selection correctness `q'`
/// with `N` candidates and `M` single-assertion suites. `M` is real so the
/// function inverts [`required_suites`] exactly.
pub fn min_assertion_reliability(q: f64, q_prime: f64, n: u32, m: f64, c: f64) -> Result<MinReliability, BoundsError> {
    let log = target_log(q, q_prime, n)?;
    let slack = if log > 0.0 {
        (2.0 / m * log).sqrt()
    } else {
        0.0
    };
    let raw = (1.0 + slack) / (1.0 + c);
    Ok(MinReliability {
        p_min: raw.min(1.0),
        raw,
        feasible: raw <= 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredSuites {
    pub m: f64,
    pub m_ceil: u64,
}

/// Suites per candidate needed to reach `q'`, inverting [`min_assertion_reliability`].
pub fn required_suites(q: f64, q_prime: f64, n: u32, c: f64, p: f64) -> Result<RequiredSuites, BoundsError> {
    let log = target_log(q, q_prime, n)?;
    let margin = (1.0 + c) * p - 1.0;
    if !(margin > 0.0) {
        return Err(BoundsError::MarginNonpositive(margin));
    }
    let m = 2.0 * log.max(0.0) / (margin * margin);
    Ok(RequiredSuites {
        m,
        m_ceil: m.ceil() as u64,
    })
}

/// Inputs for a full bound report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub q: f64,
    pub q_prime: f64,
    pub p: f64,
    pub c: f64,
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub w: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), BoundsError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(BoundsError::InvalidInput(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("q", self.q)?;
        unit("q_prime", self.q_prime)?;
        unit("p", self.p)?;
        unit("c", self.c)?;
        unit("w", self.w)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(BoundsError::InvalidInput(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(BoundsError::InvalidInput("n, m and k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every analytic quantity for one set of inputs.
///
/// `required_M`/`p_min` are `null` when their preconditions fail (no
/// positive margin, or `q' <= q`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub p_star: f64,
    pub alpha_c: f64,
    pub alpha_w: f64,
    pub margin: f64,
    pub beta: f64,
    pub union_bound: f64,
    #[serde(rename = "required_M")]
    pub required_m: Option<f64>,
    #[serde(rename = "required_M_ceil")]
    pub required_m_ceil: Option<u64>,
    pub p_min: Option<f64>,
    pub feasible: bool,
}

pub fn bound_report(inputs: BoundInputs) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    let model = suite_pass_probs(inputs.p, inputs.c, inputs.k);
    let margin = model.margin();
    let beta = if margin > 0.0 { hoeffding_beta(inputs.m, margin) } else { 1.0 };
    let union_bound = if margin > 0.0 {
        wrong_selection_bound(inputs.n, inputs.w, inputs.m, margin)
    } else {
        1.0_f64.min(inputs.w * inputs.n as f64)
    };
    let required = required_suites(inputs.q, inputs.q_prime, inputs.n, inputs.c, inputs.p).ok();
    let p_min = min_assertion_reliability(inputs.q, inputs.q_prime, inputs.n, inputs.m as f64, inputs.c).ok();
    let feasible = p_min.is_some_and(|r| r.feasible && inputs.p >= r.p_min);
    Ok(BoundReport {
        inputs,
        p_star: single_test_threshold(inputs.c),
        alpha_c: model.alpha_c,
        alpha_w: model.alpha_w,
        margin,
        beta,
        union_bound,
        required_m: required.map(|r| r.m),
        required_m_ceil: required.map(|r| r.m_ceil),
        p_min: p_min.map(|r| r.p_min),
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub alpha_c: f64,
    pub alpha_w: f64,
    pub n: u32,
    pub w: f64,
    pub m: u32,
}

impl SimConfig {
    /// `(correct, wrong)` candidate counts: `floor(W N)` wrong, the rest correct.
    pub fn split(&self) -> (usize, usize) {
        let wrong = ((self.w * self.n as f64) + 1e-9).floor() as usize;
        let wrong = wrong.min(self.n as usize);
        (self.n as usize - wrong, wrong)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOutcome {
    pub trials: u64,
    pub wrong_selections: u64,
    pub wrong_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    const Z: f64 = 1.959963984540054;
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = k as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = Z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Draws from Binomial(`trials`, `prob`) by inverting the CDF with one
/// uniform variate.
///
/// Probabilities above one half are reflected so the starting mass
/// `(1 - prob)^trials` stays as large as possible. When it still underflows
/// the draw falls back to counting Bernoulli trials.
pub fn binomial_inversion<R: Rng + ?Sized>(rng: &mut R, trials: u32, prob: f64) -> u32 {
    if prob <= 0.0 {
        return 0;
    }
    if prob >= 1.0 {
        return trials;
    }
    if prob > 0.5 {
        return trials - binomial_inversion(rng, trials, 1.0 - prob);
    }
    let mut pmf = (1.0 - prob).powi(trials as i32);
    if pmf < f64::MIN_POSITIVE {
        return (0..trials).filter(|_| rng.random::<f64>() < prob).count() as u32;
    }
    let u: f64 = rng.random();
    let ratio = prob / (1.0 - prob);
    let mut cdf = pmf;
    let mut k = 0;
    while u > cdf && k < trials {
        pmf *= ratio * (trials - k) as f64 / (k + 1) as f64;
        k += 1;
        cdf += pmf;
    }
    k
}

/// Trials per independently seeded chunk; fixed so results do not depend on
/// how many workers run the chunks.
const CHUNK: u64 = 1024;

/// Monte Carlo estimate of how often majority voting picks a wrong candidate.
///
/// Each trial draws pass counts `Binomial(M, alpha_c)` for correct and
/// `Binomial(M, alpha_w)` for wrong candidates, shuffles the candidate order,
/// and picks the first maximum.
pub fn simulate_selection(cfg: &SimConfig) -> Result<SimOutcome, BoundsError> {
    let (correct, wrong) = cfg.split();
    if correct == 0 || wrong == 0 {
        return Err(BoundsError::DegenerateConfig { correct, wrong });
    }
    if cfg.trials == 0 || cfg.m == 0 {
        return Err(BoundsError::InvalidInput("trials and m must be positive".into()));
    }
    for (name, v) in [("alpha_c", cfg.alpha_c), ("alpha_w", cfg.alpha_w)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(BoundsError::InvalidInput(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let chunks = cfg.trials.div_ceil(CHUNK);
    let wrong_selections: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk);
            let trials = CHUNK.min(cfg.trials - chunk * CHUNK);
            let mut order: Vec<usize> = (0..correct + wrong).collect();
            let mut scores = vec![0usize; order.len()];
            let mut hits = 0u64;
            for _ in 0..trials {
                order.shuffle(&mut rng);
                for (slot, &cand) in order.iter().enumerate() {
                    let alpha = if cand < correct { cfg.alpha_c } else { cfg.alpha_w };
                    scores[slot] = binomial_inversion(&mut rng, cfg.m, alpha) as usize;
                }
                if order[argmax_first(&scores)] >= correct {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let (wilson_low, wilson_high) = wilson_interval(wrong_selections, cfg.trials);
    Ok(SimOutcome {
        trials: cfg.trials,
        wrong_selections,
        wrong_rate: wrong_selections as f64 / cfg.trials as f64,
        wilson_low,
        wilson_high,
    })
}
