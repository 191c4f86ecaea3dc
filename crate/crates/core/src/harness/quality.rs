use serde::Serialize;

use super::HarnessError;
use crate::bounds::PassMatrix;
use crate::minilang::{ExecutionReport, Status};

/// Test-quality rates over a set of executed suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityReport {
    pub count: usize,
    /// Pass rate.
    pub pr: f64,
    /// Failure rate.
    pub fr: f64,
    /// Error rate.
    pub er: f64,
    /// Mean coverage over passing suites, 0 when none passed.
    pub bc: f64,
    /// Mean static assertion count.
    pub an: f64,
}

pub fn quality_report<'a>(reports: impl IntoIterator<Item = &'a ExecutionReport>) -> Result<QualityReport, HarnessError> {
    let (mut n, mut pass, mut fail, mut err) = (0usize, 0usize, 0usize, 0usize);
    let (mut cov_sum, mut assertions) = (0.0, 0u64);
    for r in reports {
        n += 1;
        assertions += u64::from(r.assertions_total);
        match r.status {
            Status::Pass => {
                pass += 1;
                cov_sum += r.coverage();
            }
            Status::Failure => fail += 1,
            Status::Error => err += 1,
        }
    }
    if n == 0 {
        return Err(HarnessError::EmptyInput);
    }
    let total = n as f64;
    Ok(QualityReport {
        count: n,
        pr: pass as f64 / total,
        fr: fail as f64 / total,
        er: err as f64 / total,
        bc: if pass == 0 { 0.0 } else { cov_sum / pass as f64 },
        an: assertions as f64 / total,
    })
}

/// `cells[i][j]` is the report of candidate `i` against suite `j`.
pub fn build_pass_matrix(cells: &[Vec<Option<&ExecutionReport>>]) -> Result<PassMatrix, HarnessError> {
    let rows = cells
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, cell)| {
                    cell.map(|r| r.status == Status::Pass)
                        .ok_or(HarnessError::MissingCell { candidate: i, suite: j })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    PassMatrix::new(rows).map_err(HarnessError::from)
}
