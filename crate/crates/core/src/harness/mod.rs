//! Corpus-level orchestration: load problems, execute every candidate
//! against every generated suite, score responses, select winners, and write
//! reports.

mod config;
mod corpus;
mod executor;
mod pipeline;
mod quality;

use std::path::PathBuf;

pub use config::{BoundTargets, ExecutorConfig, ExecutorKind, NormalizerSource, RunConfig};
pub use corpus::{load_corpus, parse_corpus, CandidateRecord, CorpusRequirements, ProblemRecord, ResponseRecord};
pub use executor::{evaluate_pair, Executor, PreparedCandidate, PreparedSuite, SubprocessExecutor, ADAPTER_VERSION_KEY};
pub use pipeline::{
    fit_normalizer_for, metrics_report, rewards_report, run_pipeline, write_atomic, MetricsEntry, PipelineSummary,
    ProblemOutcome,
};
pub use quality::{build_pass_matrix, quality_report, QualityReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error{}: {message}", record.as_ref().map(|r| format!(" in record `{r}`")).unwrap_or_default())]
    Schema { record: Option<String>, message: String },
    #[error("adapter protocol error: {0}")]
    Adapter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing report for candidate {candidate}, suite {suite}")]
    MissingCell { candidate: usize, suite: usize },
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Reward(#[from] crate::rewards::RewardError),
    #[error(transparent)]
    Bounds(#[from] crate::bounds::BoundsError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(record: Option<&str>, message: impl Into<String>) -> Self {
        HarnessError::Schema {
            record: record.map(str::to_string),
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 corpus/schema, 3 adapter protocol.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } | HarnessError::Schema { .. } | HarnessError::MissingCell { .. } => 2,
            HarnessError::Adapter(_) => 3,
            _ => 1,
        }
    }
}
