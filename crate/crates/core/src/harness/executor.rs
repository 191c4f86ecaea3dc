//! Executors turn (candidate, suite) pairs into [`ExecutionReport`]s.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::Serialize;
use wait_timeout::ChildExt;

use super::config::{ExecutorConfig, ExecutorKind};
use super::HarnessError;
use crate::minilang::{
    execute_suite, parse_program, ExecLimits, ExecutionReport, ParseError, ProgramTree, ReportDocument, SourceText,
    SuiteTree,
};
use crate::rewards::{syntax_reward, ResponseArtifact, SyntaxCheck};

/// Key the adapter adds on top of the shared report schema.
pub const ADAPTER_VERSION_KEY: &str = "adapter_version";

/// Extra time the harness grants a shim beyond its own timeout before
/// killing it.
const KILL_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub enum PreparedCandidate {
    MiniLang(Result<ProgramTree, ParseError>),
    Source(SourceText),
}

#[derive(Debug, Clone)]
pub enum PreparedSuite {
    MiniLang(SuiteTree),
    Source(SourceText),
}

/// Structural check for real test sources: at least one class deriving
/// from `unittest.TestCase`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnittestSyntax;

fn test_class_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^[ \t]*class[ \t]+\w+[ \t]*\([^)]*\b(?:unittest\.)?TestCase[ \t]*[,)]")
            .expect("static pattern")
    })
}

impl SyntaxCheck for UnittestSyntax {
    type Suite = SourceText;

    fn check(&self, code: &SourceText) -> Option<SourceText> {
        test_class_pattern().is_match(code.text()).then(|| code.clone())
    }
}

#[derive(Serialize)]
struct AdapterRequest<'a> {
    solution_source: &'a str,
    test_source: &'a str,
    timeout_seconds: f64,
}

/// Client side of the one-request-per-process adapter protocol.
#[derive(Debug, Clone)]
pub struct SubprocessExecutor {
    command: Vec<String>,
    timeout_seconds: f64,
}

impl SubprocessExecutor {
    pub fn new(command: Vec<String>, timeout_seconds: f64) -> Result<Self, HarnessError> {
        if command.is_empty() {
            return Err(HarnessError::Config("empty adapter command".into()));
        }
        Ok(SubprocessExecutor {
            command,
            timeout_seconds,
        })
    }

    pub fn run(&self, solution: &str, tests: &str) -> Result<ExecutionReport, HarnessError> {
        let mut request = serde_json::to_string(&AdapterRequest {
            solution_source: solution,
            test_source: tests,
            timeout_seconds: self.timeout_seconds,
        })
        .expect("request serializes");
        request.push('\n');

        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| HarnessError::Adapter(format!("cannot start `{}`: {e}", self.command[0])))?;

        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        if let Some(mut stdin) = child.stdin.take() {
            // A shim that exits without reading stdin surfaces below as a protocol error.
            let _ = stdin.write_all(request.as_bytes());
        }

        let limit = Duration::from_secs_f64(self.timeout_seconds) + KILL_GRACE;
        let status = match child.wait_timeout(limit) {
            Ok(Some(status)) => status,
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(HarnessError::Adapter(format!("adapter did not exit within {limit:?}")));
            }
            Err(e) => return Err(HarnessError::Adapter(format!("waiting for adapter: {e}"))),
        };
        let stdout = out_reader
            .join()
            .expect("reader thread")
            .map_err(|e| HarnessError::Adapter(format!("reading adapter output: {e}")))?;
        let stderr = err_reader.join().expect("reader thread");
        if !status.success() {
            return Err(HarnessError::Adapter(format!(
                "adapter exited with {status}: {}",
                stderr.trim()
            )));
        }
        parse_adapter_response(&stdout)
    }
}

/// Validates one adapter response: the shared report schema plus a string
/// `adapter_version`.
pub fn parse_adapter_response(bytes: &[u8]) -> Result<ExecutionReport, HarnessError> {
    let text = std::str::from_utf8(bytes).map_err(|_| HarnessError::Adapter("response is not UTF-8".into()))?;
    let mut value: serde_json::Value = serde_json::from_str(text.trim_end())
        .map_err(|e| HarnessError::Adapter(format!("response is not one JSON document: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| HarnessError::Adapter("response is not a JSON object".into()))?;
    match obj.remove(ADAPTER_VERSION_KEY) {
        Some(serde_json::Value::String(_)) => {}
        _ => return Err(HarnessError::Adapter(format!("missing string `{ADAPTER_VERSION_KEY}`"))),
    }
    let doc: ReportDocument =
        serde_json::from_value(value).map_err(|e| HarnessError::Adapter(format!("response schema: {e}")))?;
    doc.validate().map_err(|e| HarnessError::Adapter(e.to_string()))
}

/// The active execution backend.
#[derive(Debug, Clone)]
pub enum Executor {
    MiniLang(ExecLimits),
    Subprocess(SubprocessExecutor),
}

impl Executor {
    pub fn from_config(cfg: &ExecutorConfig, limits: ExecLimits) -> Result<Self, HarnessError> {
        match cfg.kind {
            ExecutorKind::Minilang => Ok(Executor::MiniLang(limits)),
            ExecutorKind::SubprocessAdapter => Ok(Executor::Subprocess(SubprocessExecutor::new(
                cfg.command.clone(),
                cfg.timeout_seconds,
            )?)),
        }
    }

    pub fn prepare_candidate(&self, src: &SourceText) -> PreparedCandidate {
        match self {
            Executor::MiniLang(_) => PreparedCandidate::MiniLang(parse_program(src)),
            Executor::Subprocess(_) => PreparedCandidate::Source(src.clone()),
        }
    }

    /// Syntax reward and, when positive, the executable suite.
    pub fn prepare_response(&self, resp: &ResponseArtifact) -> (f64, Option<PreparedSuite>) {
        match self {
            Executor::MiniLang(_) => {
                let (r, suite) = syntax_reward(resp, &crate::rewards::MiniLangSyntax);
                (r, suite.map(PreparedSuite::MiniLang))
            }
            Executor::Subprocess(_) => {
                let (r, suite) = syntax_reward(resp, &UnittestSyntax);
                (r, suite.map(PreparedSuite::Source))
            }
        }
    }

    pub fn evaluate(&self, candidate: &PreparedCandidate, suite: &PreparedSuite) -> Result<ExecutionReport, HarnessError> {
        match (self, candidate, suite) {
            (Executor::MiniLang(limits), PreparedCandidate::MiniLang(prog), PreparedSuite::MiniLang(suite)) => {
                Ok(match prog {
                    Ok(prog) => execute_suite(prog, suite, *limits),
                    Err(e) => ExecutionReport::error(
                        format!("candidate does not parse: {e}"),
                        0,
                        suite.assertions_total() as u32,
                    ),
                })
            }
            (Executor::Subprocess(sub), PreparedCandidate::Source(cand), PreparedSuite::Source(tests)) => {
                sub.run(cand.text(), tests.text())
            }
            _ => Err(HarnessError::Config("candidate and suite were prepared by a different executor".into())),
        }
    }
}

/// Runs one suite source against one candidate source.
///
/// The suite source is the extracted test code, not a full response. A
/// suite that fails the structural check is reported as an error.
pub fn evaluate_pair(candidate: &SourceText, suite_source: &SourceText, executor: &Executor) -> Result<ExecutionReport, HarnessError> {
    let prepared = executor.prepare_candidate(candidate);
    let suite = match executor {
        Executor::MiniLang(_) => crate::minilang::parse_suite(suite_source)
            .map(PreparedSuite::MiniLang)
            .map_err(|e| format!("suite does not parse: {e}")),
        Executor::Subprocess(_) => UnittestSyntax
            .check(suite_source)
            .map(PreparedSuite::Source)
            .ok_or_else(|| "no-test-declaration".to_string()),
    };
    match suite {
        Ok(suite) => executor.evaluate(&prepared, &suite),
        Err(diagnostic) => Ok(ExecutionReport::error(diagnostic, 0, 0)),
    }
}
