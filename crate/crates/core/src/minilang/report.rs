//! Execution outcome of one suite against one candidate, and its wire form.
//!
//! The JSON document is shared by every executor: the in-process MiniLang
//! interpreter and external subprocess runners produce the same shape.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Failure,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Failure => "failure",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionReport {
    pub status: Status,
    pub covered_arm_ids: BTreeSet<u32>,
    pub arms_total: u32,
    pub assertions_executed: u32,
    pub assertions_total: u32,
    pub diagnostic: String,
}

impl ExecutionReport {
    /// Covered fraction of the subject's arms, 1.0 for a branchless subject.
    pub fn coverage(&self) -> f64 {
        if self.arms_total == 0 {
            1.0
        } else {
            self.covered_arm_ids.len() as f64 / self.arms_total as f64
        }
    }

    pub fn to_document(&self) -> ReportDocument {
        ReportDocument {
            status: self.status,
            covered_arms: self.covered_arm_ids.iter().copied().collect(),
            arms_total: self.arms_total,
            coverage: self.coverage(),
            assertions_total: self.assertions_total,
            assertions_executed: self.assertions_executed,
            diagnostic: self.diagnostic.clone(),
        }
    }

    /// Builds an error report that carries no coverage.
    pub fn error(diagnostic: impl Into<String>, arms_total: u32, assertions_total: u32) -> Self {
        ExecutionReport {
            status: Status::Error,
            covered_arm_ids: BTreeSet::new(),
            arms_total,
            assertions_executed: 0,
            assertions_total,
            diagnostic: diagnostic.into(),
        }
    }
}

/// Serialized execution report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub status: Status,
    pub covered_arms: Vec<u32>,
    pub arms_total: u32,
    pub coverage: f64,
    pub assertions_total: u32,
    pub assertions_executed: u32,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("report schema violation: {0}")]
pub struct SchemaViolation(pub String);

const COVERAGE_TOLERANCE: f64 = 1e-6;

impl ReportDocument {
    /// Checks every schema invariant and converts to an [`ExecutionReport`].
    pub fn validate(&self) -> Result<ExecutionReport, SchemaViolation> {
        let fail = |m: String| Err(SchemaViolation(m));
        if !self.covered_arms.windows(2).all(|w| w[0] < w[1]) {
            return fail("covered_arms must be strictly ascending".into());
        }
        if let Some(&last) = self.covered_arms.last() {
            if last >= self.arms_total {
                return fail(format!(
                    "covered arm {last} outside 0..{}",
                    self.arms_total
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return fail(format!("coverage {} outside [0, 1]", self.coverage));
        }
        if self.assertions_executed > self.assertions_total {
            return fail("assertions_executed exceeds assertions_total".into());
        }
        if self.status == Status::Pass && self.assertions_executed != self.assertions_total {
            return fail("a passing report must execute every assertion".into());
        }
        let report = ExecutionReport {
            status: self.status,
            covered_arm_ids: self.covered_arms.iter().copied().collect(),
            arms_total: self.arms_total,
            assertions_executed: self.assertions_executed,
            assertions_total: self.assertions_total,
            diagnostic: self.diagnostic.clone(),
        };
        if (report.coverage() - self.coverage).abs() > COVERAGE_TOLERANCE {
            return fail(format!(
                "coverage {} disagrees with {}/{} covered arms",
                self.coverage,
                self.covered_arms.len(),
                self.arms_total
            ));
        }
        Ok(report)
    }
}
