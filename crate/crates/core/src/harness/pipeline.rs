//! End-to-end corpus run.
//!
//! Output layout under the run directory:
//!
//! ```text
//! summary.json
//! problems/<problem id>/report.json
//! ```
//!
//! Every file is written through a temp file and renamed into place. Reports
//! contain no timestamps or host details, so reruns with the same corpus,
//! config, and seed produce identical bytes.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExecutorKind, RunConfig};
use super::corpus::{load_corpus, CorpusRequirements, ProblemRecord};
use super::executor::{Executor, PreparedCandidate, PreparedSuite};
use super::quality::{build_pass_matrix, quality_report, QualityReport};
use super::HarnessError;
use crate::bounds::{bound_report, majority_select, simulate_selection, BoundInputs, BoundReport, PassMatrix, SimConfig, SimOutcome};
use crate::metrics::{CorpusNormalizer, StaticProfile};
use crate::minilang::{ExecutionReport, ReportDocument, SourceText};
use crate::rewards::{group_advantages, OutcomeClass, ResponseArtifact, RewardBreakdown, RewardVariant};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    use std::io::Write;
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

fn source(text: &str, origin: impl Into<String>) -> SourceText {
    SourceText::new(text, origin).expect("origin ids are non-empty")
}

fn build_executor(cfg: &RunConfig) -> Result<Executor, HarnessError> {
    Executor::from_config(&cfg.executor, cfg.limits)
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, HarnessError> {
    let threads = match cfg.executor.kind {
        ExecutorKind::SubprocessAdapter => cfg.executor.pool_size,
        ExecutorKind::Minilang => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Clip point for Halstead difficulty, or `None` when static metrics are
/// unavailable for the active executor.
pub fn fit_normalizer_for(cfg: &RunConfig, problems: &[ProblemRecord]) -> Result<Option<CorpusNormalizer>, HarnessError> {
    if cfg.executor.kind != ExecutorKind::Minilang {
        return Ok(None);
    }
    if let Some(d) = cfg.normalizer.d_hat_95 {
        return Ok(Some(CorpusNormalizer::precomputed(d)?));
    }
    let external;
    let corpus = match &cfg.normalizer.corpus {
        Some(path) => {
            external = load_corpus(path, CorpusRequirements::default())?;
            &external
        }
        None => problems,
    };
    let values: Vec<f64> = corpus
        .iter()
        .filter_map(|p| StaticProfile::of_source(&source(&p.solution, p.id.as_str())).ok())
        .map(|prof| prof.d_hat)
        .collect();
    if values.is_empty() {
        return Ok(None);
    }
    Ok(Some(CorpusNormalizer::fit(&values)?))
}

#[derive(Debug, Clone, Serialize)]
struct ResponseScore {
    id: String,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
    advantage: Option<f64>,
    execution: Option<ReportDocument>,
}

#[derive(Debug, Clone, Serialize)]
struct RewardSection {
    variant: RewardVariant,
    alpha: f64,
    responses: Vec<ResponseScore>,
}

#[derive(Debug, Clone, Serialize)]
struct SelectionSection {
    candidates: Vec<String>,
    suites: Vec<String>,
    pass_matrix: PassMatrix,
    row_sums: Vec<usize>,
    selected_index: usize,
    selected_candidate: String,
    cell_diagnostics: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
struct ProblemReport {
    id: String,
    static_profile: Option<StaticProfile>,
    d_hat_95: Option<f64>,
    #[serde(rename = "difficulty_D")]
    difficulty: Option<f64>,
    rewards: Option<RewardSection>,
    selection: Option<SelectionSection>,
    selection_skipped: Option<String>,
    quality: Option<QualityReport>,
    bounds: Option<BoundReport>,
    simulation: Option<SimOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemOutcome {
    pub id: String,
    pub ok: bool,
    pub selected_candidate: Option<String>,
    pub error: Option<String>,
    /// Exit code class of the error, when there was one.
    pub error_code: Option<i32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub executor: ExecutorKind,
    pub variant: RewardVariant,
    pub alpha: f64,
    pub normalizer: Option<CorpusNormalizer>,
    pub problems: Vec<ProblemOutcome>,
    pub failed: Vec<String>,
    pub quality: Option<QualityReport>,
}

impl PipelineSummary {
    /// 0 when every problem succeeded, otherwise the code of the first failure.
    pub fn exit_code(&self) -> i32 {
        self.problems.iter().find_map(|p| p.error_code).unwrap_or(0)
    }
}

struct Scored {
    section: RewardSection,
    /// Executable suites, in response order, with their ids.
    suites: Vec<(String, PreparedSuite)>,
    reports: Vec<ExecutionReport>,
}

struct ProblemContext<'a> {
    cfg: &'a RunConfig,
    executor: &'a Executor,
    pool: &'a rayon::ThreadPool,
    normalizer: Option<CorpusNormalizer>,
}

impl ProblemContext<'_> {
    fn profile(&self, p: &ProblemRecord) -> Result<Option<StaticProfile>, HarnessError> {
        if self.cfg.executor.kind != ExecutorKind::Minilang {
            return Ok(None);
        }
        StaticProfile::of_source(&source(&p.solution, p.id.as_str()))
            .map(Some)
            .map_err(|e| HarnessError::schema(Some(&p.id), format!("reference solution: {e}")))
    }

    fn score_responses(&self, p: &ProblemRecord, difficulty: Option<f64>) -> Result<Scored, HarnessError> {
        let solution = self.executor.prepare_candidate(&source(&p.solution, p.id.as_str()));
        let prepared: Vec<(f64, Option<PreparedSuite>)> = p
            .responses
            .iter()
            .map(|r| self.executor.prepare_response(&ResponseArtifact::new(r.text.as_str(), &r.id)))
            .collect();
        let executions: Vec<Option<ExecutionReport>> = self.pool.install(|| {
            prepared
                .par_iter()
                .map(|(_, suite)| suite.as_ref().map(|s| self.executor.evaluate(&solution, s)).transpose())
                .collect::<Result<_, _>>()
        })?;

        let mut scores = Vec::with_capacity(prepared.len());
        for (resp, execution) in p.responses.iter().zip(&executions) {
            let breakdown = match execution {
                None => RewardBreakdown::syntax_failure(),
                Some(rep) => RewardBreakdown::scored(
                    OutcomeClass::from_status(rep.status, rep.coverage()),
                    self.cfg.variant,
                    self.cfg.shaping,
                    difficulty,
                )?,
            };
            scores.push(ResponseScore {
                id: resp.id.clone(),
                breakdown,
                advantage: None,
                execution: execution.as_ref().map(ExecutionReport::to_document),
            });
        }
        if scores.len() >= 2 {
            let totals: Vec<f64> = scores.iter().map(|s| s.breakdown.total).collect();
            let adv = group_advantages(&totals, self.cfg.grpo.sigma_floor)?;
            for (s, a) in scores.iter_mut().zip(adv) {
                s.advantage = Some(a);
            }
        }

        let suites = p
            .responses
            .iter()
            .zip(prepared)
            .filter_map(|(r, (_, suite))| suite.map(|s| (r.id.clone(), s)))
            .collect();
        Ok(Scored {
            section: RewardSection {
                variant: self.cfg.variant,
                alpha: self.cfg.shaping.alpha,
                responses: scores,
            },
            suites,
            reports: executions.into_iter().flatten().collect(),
        })
    }

    fn select(&self, p: &ProblemRecord, suites: &[(String, PreparedSuite)]) -> Result<SelectionSection, HarnessError> {
        let candidates: Vec<PreparedCandidate> = p
            .candidates
            .iter()
            .map(|c| self.executor.prepare_candidate(&source(&c.source, c.id.as_str())))
            .collect();
        let width = suites.len();
        let cells: Vec<ExecutionReport> = self.pool.install(|| {
            (0..candidates.len() * width)
                .into_par_iter()
                .map(|k| self.executor.evaluate(&candidates[k / width], &suites[k % width].1))
                .collect::<Result<_, _>>()
        })?;
        let grid: Vec<Vec<Option<&ExecutionReport>>> = cells.chunks(width).map(|row| row.iter().map(Some).collect()).collect();
        let matrix = build_pass_matrix(&grid)?;
        let selected = majority_select(&matrix);
        Ok(SelectionSection {
            candidates: p.candidates.iter().map(|c| c.id.clone()).collect(),
            suites: suites.iter().map(|(id, _)| id.clone()).collect(),
            row_sums: matrix.row_sums(),
            pass_matrix: matrix,
            selected_index: selected,
            selected_candidate: p.candidates[selected].id.clone(),
            cell_diagnostics: cells
                .chunks(width)
                .map(|row| row.iter().map(|r| format!("{}: {}", r.status.as_str(), r.diagnostic)).collect())
                .collect(),
        })
    }

    fn bounds(&self, quality: &QualityReport, n: usize, m: usize) -> Option<BoundInputs> {
        let t = self.cfg.bounds;
        let inputs = BoundInputs {
            q: t.q,
            q_prime: t.q_prime,
            p: quality.pr,
            c: quality.bc,
            n: n as u32,
            m: m as u32,
            k: (quality.an.round() as u32).max(1),
            w: 1.0 - t.q,
            delta: 1.0 - t.q_prime,
        };
        inputs.validate().ok().map(|_| inputs)
    }

    fn run_problem(&self, index: usize, p: &ProblemRecord) -> Result<ProblemReport, HarnessError> {
        let profile = self.profile(p)?;
        let difficulty = match (&profile, &self.normalizer) {
            (Some(prof), Some(norm)) => Some(prof.difficulty(norm)),
            _ => None,
        };
        let scored = self.score_responses(p, difficulty)?;
        let quality = quality_report(&scored.reports).ok();

        let (selection, selection_skipped) = if p.candidates.is_empty() {
            (None, Some("no candidates".to_string()))
        } else if scored.suites.is_empty() {
            (None, Some("no well-formed suites".to_string()))
        } else {
            (Some(self.select(p, &scored.suites)?), None)
        };

        let bound_inputs = match (&quality, &selection) {
            (Some(q), Some(s)) => self.bounds(q, s.candidates.len(), s.suites.len()),
            _ => None,
        };
        let bounds = bound_inputs.and_then(|i| bound_report(i).ok());
        let simulation = match (&bounds, self.cfg.bounds.sim_trials) {
            (Some(b), trials) if trials > 0 => simulate_selection(&SimConfig {
                trials,
                seed: problem_seed(self.cfg.seed, index),
                alpha_c: b.alpha_c,
                alpha_w: b.alpha_w,
                n: b.inputs.n,
                w: b.inputs.w,
                m: b.inputs.m,
            })
            .ok(),
            _ => None,
        };

        Ok(ProblemReport {
            id: p.id.clone(),
            static_profile: profile,
            d_hat_95: self.normalizer.map(|n| n.d_hat_95),
            difficulty,
            rewards: (!p.responses.is_empty()).then_some(scored.section),
            selection,
            selection_skipped,
            quality,
            bounds,
            simulation,
        })
    }
}

fn problem_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn collect_reports(report: &ProblemReport) -> Vec<ExecutionReport> {
    report
        .rewards
        .iter()
        .flat_map(|r| &r.responses)
        .filter_map(|s| s.execution.as_ref())
        .filter_map(|d| d.validate().ok())
        .collect()
}

/// Runs the full pipeline over `problems`, writing reports under
/// `cfg.out_dir`. A failing problem is recorded in the summary and the run
/// continues.
pub fn run_pipeline(cfg: &RunConfig, problems: &[ProblemRecord]) -> Result<PipelineSummary, HarnessError> {
    cfg.validate()?;
    let executor = build_executor(cfg)?;
    let pool = thread_pool(cfg)?;
    let ctx = ProblemContext {
        cfg,
        executor: &executor,
        pool: &pool,
        normalizer: fit_normalizer_for(cfg, problems)?,
    };

    let mut outcomes = Vec::with_capacity(problems.len());
    let mut all_reports = Vec::new();
    for (index, p) in problems.iter().enumerate() {
        match ctx.run_problem(index, p) {
            Ok(report) => {
                all_reports.extend(collect_reports(&report));
                write_atomic(&cfg.out_dir.join("problems").join(&p.id).join("report.json"), &to_json(&report))?;
                outcomes.push(ProblemOutcome {
                    id: p.id.clone(),
                    ok: true,
                    selected_candidate: report.selection.map(|s| s.selected_candidate),
                    error: None,
                    error_code: None,
                });
            }
            Err(e) => outcomes.push(ProblemOutcome {
                id: p.id.clone(),
                ok: false,
                selected_candidate: None,
                error: Some(e.to_string()),
                error_code: Some(e.exit_code()),
            }),
        }
    }

    let summary = PipelineSummary {
        seed: cfg.seed,
        executor: cfg.executor.kind,
        variant: cfg.variant,
        alpha: cfg.shaping.alpha,
        normalizer: ctx.normalizer,
        failed: outcomes.iter().filter(|o| !o.ok).map(|o| o.id.clone()).collect(),
        problems: outcomes,
        quality: quality_report(&all_reports).ok(),
    };
    write_atomic(&cfg.out_dir.join("summary.json"), &to_json(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct RewardsEntry {
    pub id: String,
    #[serde(rename = "difficulty_D")]
    pub difficulty: Option<f64>,
    pub responses: serde_json::Value,
}

/// Reward breakdowns for every response of every problem, without selection.
pub fn rewards_report(cfg: &RunConfig, problems: &[ProblemRecord]) -> Result<serde_json::Value, HarnessError> {
    cfg.validate()?;
    let executor = build_executor(cfg)?;
    let pool = thread_pool(cfg)?;
    let ctx = ProblemContext {
        cfg,
        executor: &executor,
        pool: &pool,
        normalizer: fit_normalizer_for(cfg, problems)?,
    };
    let mut entries = Vec::with_capacity(problems.len());
    let mut reports = Vec::new();
    for p in problems {
        let profile = ctx.profile(p)?;
        let difficulty = match (&profile, &ctx.normalizer) {
            (Some(prof), Some(norm)) => Some(prof.difficulty(norm)),
            _ => None,
        };
        let scored = ctx.score_responses(p, difficulty)?;
        reports.extend(scored.reports);
        entries.push(RewardsEntry {
            id: p.id.clone(),
            difficulty,
            responses: serde_json::to_value(&scored.section).expect("serializes"),
        });
    }
    Ok(serde_json::json!({
        "normalizer": ctx.normalizer,
        "problems": entries,
        "quality": quality_report(&reports).ok(),
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsEntry {
    pub id: String,
    pub origin: String,
    pub profile: Option<StaticProfile>,
    #[serde(rename = "difficulty_D")]
    pub difficulty: Option<f64>,
    pub error: Option<String>,
}

/// Static profiles of every reference solution and candidate.
pub fn metrics_report(cfg: &RunConfig, problems: &[ProblemRecord]) -> Result<serde_json::Value, HarnessError> {
    if cfg.executor.kind != ExecutorKind::Minilang {
        return Err(HarnessError::Config("static metrics are only available for minilang subjects".into()));
    }
    let normalizer = fit_normalizer_for(cfg, problems)?;
    let mut entries = Vec::new();
    for p in problems {
        let sources = std::iter::once(("solution".to_string(), &p.solution))
            .chain(p.candidates.iter().map(|c| (format!("candidate:{}", c.id), &c.source)));
        for (origin, text) in sources {
            let entry = match StaticProfile::of_source(&source(text, origin.as_str())) {
                Ok(prof) => MetricsEntry {
                    id: p.id.clone(),
                    difficulty: normalizer.map(|n| prof.difficulty(&n)),
                    profile: Some(prof),
                    origin,
                    error: None,
                },
                Err(e) => MetricsEntry {
                    id: p.id.clone(),
                    origin,
                    profile: None,
                    difficulty: None,
                    error: Some(e.to_string()),
                },
            };
            entries.push(entry);
        }
    }
    Ok(serde_json::json!({ "normalizer": normalizer, "samples": entries }))
}
