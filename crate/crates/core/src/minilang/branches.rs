//! Branch-arm universe of a subject program.

use serde::Serialize;

use super::ast::{walk_block, ProgramTree, StmtKind};
use super::lexer::Span;
use super::report::ExecutionReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    If,
    While,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Taken,
    NotTaken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchArm {
    pub arm_id: u32,
    pub site: Span,
    pub site_kind: SiteKind,
    pub arm_kind: ArmKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BranchMap {
    pub arms: Vec<BranchArm>,
}

impl BranchMap {
    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }
}

/// Arm id for one outcome of decision site `site`.
pub fn arm_id(site: u32, taken: bool) -> u32 {
    2 * site + u32::from(!taken)
}

/// Lists both arms of every `if`/`while` site in depth-first source order.
/// An `if` without `else` still has a not-taken arm.
pub fn enumerate_branches(prog: &ProgramTree) -> BranchMap {
    let mut arms = Vec::with_capacity(2 * prog.site_count as usize);
    for f in &prog.functions {
        walk_block(&f.body, &mut |stmt| {
            let (site, kind) = match &stmt.kind {
                StmtKind::If { site, .. } => (*site, SiteKind::If),
                StmtKind::While { site, .. } => (*site, SiteKind::While),
                _ => return,
            };
            debug_assert_eq!(arm_id(site, true) as usize, arms.len());
            for (taken, arm_kind) in [(true, ArmKind::Taken), (false, ArmKind::NotTaken)] {
                arms.push(BranchArm {
                    arm_id: arm_id(site, taken),
                    site: stmt.span,
                    site_kind: kind,
                    arm_kind,
                });
            }
        });
    }
    BranchMap { arms }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("report covers arm {arm_id} but the program only has {arms_total} arms")]
pub struct InconsistentReport {
    pub arm_id: u32,
    pub arms_total: usize,
}

/// Fraction of arms covered; a branchless program counts as fully covered.
pub fn coverage(report: &ExecutionReport, branches: &BranchMap) -> Result<f64, InconsistentReport> {
    let total = branches.len();
    if let Some(&bad) = report.covered_arm_ids.iter().find(|&&id| id as usize >= total) {
        return Err(InconsistentReport {
            arm_id: bad,
            arms_total: total,
        });
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(report.covered_arm_ids.len() as f64 / total as f64)
}
