//! Verification lab for generated unit tests.
//!
//! * [`minilang`]: subject language, interpreter, and branch coverage.
//! * [`metrics`]: Halstead, cyclomatic, and maintainability metrics that
//!   feed the static sample difficulty.
//! * [`rewards`]: syntax/functionality rewards, coverage shaping, and the
//!   group-relative policy objective.
//! * [`bounds`]: majority-vote selection and its reliability bounds, with a
//!   Monte Carlo check.
//! * [`harness`]: corpus loading, execution, reporting, and the pipeline.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod harness;
pub mod metrics;
pub mod minilang;
pub mod rewards;

pub use bounds::{majority_select, BoundInputs, PassMatrix};
pub use minilang::{ExecLimits, ExecutionReport, SourceText, Status};
pub use rewards::RewardBreakdown;
