//! MiniLang: a small deterministic subject language.
//!
//! Candidate programs and unit-test suites are written in MiniLang so they
//! can be parsed, executed, and coverage-measured in process. Only `if` and
//! `while` are decision sites; each contributes a taken and a not-taken arm.

mod ast;
mod branches;
mod interp;
mod lexer;
mod parser;
mod report;

use std::fmt;

pub use ast::*;
pub use branches::{arm_id, coverage, enumerate_branches, ArmKind, BranchArm, BranchMap, InconsistentReport, SiteKind};
pub use interp::{call_function, execute_suite, ExecLimits, Value};
pub use lexer::{lex, Keyword, Span, Symbol, Token, TokenKind};
pub use parser::{parse_program, parse_suite};
pub use report::{ExecutionReport, ReportDocument, SchemaViolation, Status};

/// Source code plus an identifier for where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    text: String,
    origin_id: String,
}

impl SourceText {
    /// Returns `None` when `origin_id` is empty.
    pub fn new(text: impl Into<String>, origin_id: impl Into<String>) -> Option<Self> {
        let origin_id = origin_id.into();
        if origin_id.is_empty() {
            return None;
        }
        Some(SourceText {
            text: text.into(),
            origin_id,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn origin_id(&self) -> &str {
        &self.origin_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(at: Span, message: impl Into<String>) -> Self {
        ParseError {
            line: at.line,
            col: at.col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuiteParseError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("source contains no suite declaration")]
    MissingSuite,
}
