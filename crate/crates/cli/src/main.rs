use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use verilab_core::bounds::{bound_report, simulate_selection, suite_pass_probs, wrong_selection_bound, BoundInputs, SimConfig};
use verilab_core::harness::{
    load_corpus, metrics_report, quality_report, rewards_report, run_pipeline, CorpusRequirements, ExecutorKind,
    HarnessError, RunConfig,
};
use verilab_core::minilang::ReportDocument;
use verilab_core::rewards::RewardVariant;

/// Execution-based verification of generated programs and tests.
#[derive(Debug, Parser)]
#[command(name = "verilab", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for run artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Executor backend: minilang or subprocess-adapter.
    #[arg(long, global = true)]
    executor: Option<ExecutorKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the selection pipeline over a corpus and write per-problem reports.
    Verify(CorpusArgs),
    /// Score every response of every problem.
    Rewards {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Overrides the configured reward variant.
        #[arg(long)]
        variant: Option<RewardVariant>,
    },
    /// Static profiles of reference solutions and candidates.
    Metrics(CorpusArgs),
    /// Analytic bound calculators; one JSON line per `--p` value.
    Bounds(BoundArgs),
    /// Monte Carlo estimate of the wrong-selection rate.
    Simulate(SimArgs),
    /// Aggregate PR/FR/ER/BC/AN.
    Quality(QualityArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus document.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 0.7132)]
    q: f64,
    #[arg(long = "q-prime", default_value_t = 0.7693)]
    q_prime: f64,
    /// Assertion reliability; repeat for a sweep.
    #[arg(long, num_args = 1.., default_values_t = [0.85])]
    p: Vec<f64>,
    #[arg(long, default_value_t = 0.97)]
    c: f64,
    #[arg(long, default_value_t = 100)]
    n: u32,
    #[arg(long, default_value_t = 100)]
    m: u32,
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Wrong-candidate fraction; defaults to 1 - q.
    #[arg(long)]
    w: Option<f64>,
    /// Failure probability; defaults to 1 - q'.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0.85)]
    p: f64,
    #[arg(long, default_value_t = 0.97)]
    c: f64,
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Suite pass probability for correct candidates; overrides p, c, k.
    #[arg(long = "alpha-c", requires = "alpha_w")]
    alpha_c: Option<f64>,
    /// Suite pass probability for wrong candidates.
    #[arg(long = "alpha-w", requires = "alpha_c")]
    alpha_w: Option<f64>,
    #[arg(long, default_value_t = 100)]
    n: u32,
    #[arg(long, default_value_t = 100)]
    m: u32,
    #[arg(long, default_value_t = 0.2868)]
    w: f64,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct QualityArgs {
    /// Run every response against its reference solution.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Report documents, each holding one report or an array of reports.
    #[arg(long, num_args = 1..)]
    reports: Vec<PathBuf>,
}

fn run_config(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = cli.executor {
        cfg.executor.kind = kind;
    }
    Ok(cfg)
}

/// Writes one line to stdout; a closed pipe is not an error for a CLI.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json<T: Serialize>(value: &T) {
    emit(&serde_json::to_string_pretty(value).expect("serializable output"));
}

fn read_reports(path: &Path) -> Result<Vec<verilab_core::ExecutionReport>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let schema = |message: String| HarnessError::Schema {
        record: Some(path.display().to_string()),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    let docs: Vec<ReportDocument> = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(serde_json::from_value)
            .collect::<Result<_, _>>()
            .map_err(|e| schema(e.to_string()))?,
        single => vec![serde_json::from_value(single).map_err(|e| schema(e.to_string()))?],
    };
    docs.into_iter()
        .map(|d| d.validate().map_err(|e| schema(e.to_string())))
        .collect()
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let reward_corpus = CorpusRequirements {
        candidates: false,
        responses: true,
    };
    match &cli.command {
        Command::Verify(args) => {
            let cfg = run_config(&cli)?;
            let corpus = load_corpus(
                &args.corpus,
                CorpusRequirements {
                    candidates: true,
                    responses: false,
                },
            )?;
            let summary = run_pipeline(&cfg, &corpus)?;
            print_json(&summary);
            Ok(summary.exit_code())
        }
        Command::Rewards { corpus, variant } => {
            let mut cfg = run_config(&cli)?;
            if let Some(v) = variant {
                cfg.variant = *v;
            }
            let problems = load_corpus(&corpus.corpus, reward_corpus)?;
            print_json(&rewards_report(&cfg, &problems)?);
            Ok(0)
        }
        Command::Metrics(args) => {
            let cfg = run_config(&cli)?;
            let problems = load_corpus(&args.corpus, CorpusRequirements::default())?;
            print_json(&metrics_report(&cfg, &problems)?);
            Ok(0)
        }
        Command::Bounds(b) => {
            for &p in &b.p {
                let report = bound_report(BoundInputs {
                    q: b.q,
                    q_prime: b.q_prime,
                    p,
                    c: b.c,
                    n: b.n,
                    m: b.m,
                    k: b.k,
                    w: b.w.unwrap_or(1.0 - b.q),
                    delta: b.delta.unwrap_or(1.0 - b.q_prime),
                })?;
                emit(&serde_json::to_string(&report).expect("serializable output"));
            }
            Ok(0)
        }
        Command::Simulate(s) => {
            let (alpha_c, alpha_w) = match (s.alpha_c, s.alpha_w) {
                (Some(c), Some(w)) => (c, w),
                _ => {
                    let model = suite_pass_probs(s.p, s.c, s.k);
                    (model.alpha_c, model.alpha_w)
                }
            };
            let sim = SimConfig {
                trials: s.trials,
                seed: cli.seed.unwrap_or(0),
                alpha_c,
                alpha_w,
                n: s.n,
                w: s.w,
                m: s.m,
            };
            let outcome = simulate_selection(&sim)?;
            let margin = alpha_c - alpha_w;
            let bound = (margin > 0.0).then(|| wrong_selection_bound(s.n, s.w, s.m, margin));
            print_json(&serde_json::json!({ "config": sim, "outcome": outcome, "union_bound": bound }));
            Ok(0)
        }
        Command::Quality(q) => {
            if let Some(path) = &q.corpus {
                let cfg = run_config(&cli)?;
                let problems = load_corpus(path, reward_corpus)?;
                let report = rewards_report(&cfg, &problems)?;
                print_json(&report["quality"]);
            } else {
                let mut all = Vec::new();
                for path in &q.reports {
                    all.extend(read_reports(path)?);
                }
                print_json(&quality_report(&all)?);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
