//! Static difficulty of a code sample.
//!
//! Two views of difficulty are combined: Halstead difficulty (how much
//! vocabulary and operand repetition a reader must track), normalized against
//! a corpus percentile, and the inverted Maintainability Index. Their
//! geometric mean `D` is large only when both are large.
//!
//! Token classification for Halstead counts:
//!
//! | class     | tokens                                                        |
//! |-----------|---------------------------------------------------------------|
//! | operators | `fn let if else while return assert`, `= + - * / % == != < <= > >= && \|\| !` |
//! | operands  | identifiers, integer literals, `true`, `false`                |
//! | ignored   | `( ) { } ; ,`, `suite`, `case`                                |

use std::collections::HashSet;

use serde::Serialize;

use crate::minilang::{lex, Keyword, ParseError, ProgramTree, SourceText, StmtKind, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct HalsteadCounts {
    /// Distinct operators.
    pub eta1: u32,
    /// Distinct operands.
    pub eta2: u32,
    /// Operator occurrences.
    pub n1: u32,
    /// Operand occurrences.
    pub n2: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("comment ratio {0} outside [0, 1]")]
    Domain(f64),
    #[error("cannot fit a normalizer to an empty corpus")]
    EmptyCorpus,
    #[error("difficulty value {0} must be finite and nonnegative")]
    InvalidValue(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

enum Role {
    Operator(String),
    Operand(String),
}

fn classify(tok: &Token) -> Option<Role> {
    match &tok.kind {
        TokenKind::Keyword(Keyword::Suite | Keyword::Case) => None,
        TokenKind::Keyword(k) => Some(Role::Operator(k.as_str().to_string())),
        TokenKind::Symbol(s) if s.is_grouping() => None,
        TokenKind::Symbol(s) => Some(Role::Operator(s.as_str().to_string())),
        TokenKind::Ident(name) => Some(Role::Operand(name.clone())),
        TokenKind::Int(v) => Some(Role::Operand(v.to_string())),
        TokenKind::True => Some(Role::Operand("true".into())),
        TokenKind::False => Some(Role::Operand("false".into())),
    }
}

pub fn halstead_counts(tokens: &[Token]) -> HalsteadCounts {
    let mut operators = HashSet::new();
    let mut operands = HashSet::new();
    let mut counts = HalsteadCounts::default();
    for role in tokens.iter().filter_map(classify) {
        match role {
            Role::Operator(op) => {
                counts.n1 += 1;
                operators.insert(op);
            }
            Role::Operand(od) => {
                counts.n2 += 1;
                operands.insert(od);
            }
        }
    }
    counts.eta1 = operators.len() as u32;
    counts.eta2 = operands.len() as u32;
    counts
}

/// `(eta1 / 2) * (n2 / eta2)`, or 0 without operands.
pub fn halstead_difficulty_raw(c: &HalsteadCounts) -> f64 {
    if c.eta2 == 0 {
        return 0.0;
    }
    (c.eta1 as f64 / 2.0) * (c.n2 as f64 / c.eta2 as f64)
}

/// `(n1 + n2) * log2(eta1 + eta2)`.
pub fn halstead_volume(c: &HalsteadCounts) -> f64 {
    let vocabulary = c.eta1 + c.eta2;
    if vocabulary <= 1 {
        return 0.0;
    }
    (c.n1 + c.n2) as f64 * (vocabulary as f64).log2()
}

/// One plus the number of decision sites across the whole sample.
pub fn cyclomatic(prog: &ProgramTree) -> u32 {
    let mut decisions = 0;
    for f in &prog.functions {
        crate::minilang::walk_block(&f.body, &mut |s| {
            if matches!(s.kind, StmtKind::If { .. } | StmtKind::While { .. }) {
                decisions += 1;
            }
        });
    }
    1 + decisions
}

/// Returns `(code lines, comment-only lines / nonblank lines)`.
///
/// Lines mixing code and a trailing comment count as code. Code lines are
/// floored at 1 for any source with a nonblank line.
pub fn loc_and_comments(src: &str) -> (u32, f64) {
    let (mut code, mut comment) = (0u32, 0u32);
    for line in src.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.starts_with('#') {
            comment += 1;
        } else {
            code += 1;
        }
    }
    let nonblank = code + comment;
    if nonblank == 0 {
        return (0, 0.0);
    }
    (code.max(1), comment as f64 / nonblank as f64)
}

/// Maintainability Index on a 0..=100 scale.
///
/// `ln` arguments are floored at 1 and the result is clamped to `[0, 100]`.
pub fn maintainability_index(volume: f64, cyclomatic: u32, loc: u32, comment_ratio: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&comment_ratio) {
        return Err(MetricsError::Domain(comment_ratio));
    }
    let raw = 171.0 - 5.2 * volume.max(1.0).ln() - 0.23 * cyclomatic as f64 - 16.2 * (loc.max(1) as f64).ln()
        + 50.0 * (2.4 * comment_ratio).sqrt().sin();
    Ok((100.0 * raw / 171.0).clamp(0.0, 100.0))
}

pub fn maintainability_difficulty(mi: f64) -> f64 {
    (1.0 - mi / 100.0).clamp(0.0, 1.0)
}

/// Clip point for Halstead difficulty, fitted once per corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct CorpusNormalizer {
    pub d_hat_95: f64,
    pub corpus_size: usize,
}

impl CorpusNormalizer {
    /// Nearest-rank 95th percentile: the `ceil(0.95 n)`-th smallest value.
    pub fn fit(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyCorpus);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(MetricsError::InvalidValue(bad));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        // 95 * n / 100 rounded up, in integers to dodge 0.95 * 100 = 95.00000000000001
        let rank = (95 * sorted.len()).div_ceil(100).max(1);
        Ok(CorpusNormalizer {
            d_hat_95: sorted[rank - 1],
            corpus_size: sorted.len(),
        })
    }

    /// Uses a clip point computed elsewhere.
    pub fn precomputed(d_hat_95: f64) -> Result<Self, MetricsError> {
        if !d_hat_95.is_finite() || d_hat_95 < 0.0 {
            return Err(MetricsError::InvalidValue(d_hat_95));
        }
        Ok(CorpusNormalizer {
            d_hat_95,
            corpus_size: 1,
        })
    }

    /// `min(d_hat, d_hat_95) / d_hat_95`, or 0 for a zero clip point.
    pub fn normalize(&self, d_hat: f64) -> f64 {
        if self.d_hat_95 <= 0.0 {
            return 0.0;
        }
        d_hat.max(0.0).min(self.d_hat_95) / self.d_hat_95
    }
}

/// Geometric mean of the two normalized difficulties.
pub fn sample_difficulty(d_h: f64, d_m: f64) -> f64 {
    (d_h * d_m).sqrt()
}

/// All static metrics of one sample that do not depend on the corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticProfile {
    #[serde(flatten)]
    pub halstead: HalsteadCounts,
    pub volume: f64,
    pub cyclomatic: u32,
    pub loc: u32,
    pub comment_ratio: f64,
    pub mi: f64,
    pub d_hat: f64,
    pub d_m: f64,
}

impl StaticProfile {
    pub fn of_program(src: &SourceText, prog: &ProgramTree) -> Result<Self, MetricsError> {
        let halstead = halstead_counts(&lex(src.text())?);
        let volume = halstead_volume(&halstead);
        let g = cyclomatic(prog);
        let (loc, comment_ratio) = loc_and_comments(src.text());
        let loc = loc.max(1);
        let mi = maintainability_index(volume, g, loc, comment_ratio)?;
        Ok(StaticProfile {
            halstead,
            volume,
            cyclomatic: g,
            loc,
            comment_ratio,
            mi,
            d_hat: halstead_difficulty_raw(&halstead),
            d_m: maintainability_difficulty(mi),
        })
    }

    pub fn of_source(src: &SourceText) -> Result<Self, MetricsError> {
        let prog = crate::minilang::parse_program(src)?;
        Self::of_program(src, &prog)
    }

    /// Sample difficulty `D` under a corpus normalizer.
    pub fn difficulty(&self, norm: &CorpusNormalizer) -> f64 {
        sample_difficulty(norm.normalize(self.d_hat), self.d_m)
    }
}
