//! Deterministic claim parsing, constraint and claim evaluation, and
//! version diffing.

mod constraint;
mod diff;
mod evaluate;
mod parser;

use thiserror::Error;

pub use constraint::{compare, evaluate_constraint, ActionContext, ConstraintOutcome};
pub use diff::{diff_policies, PolicyDiff};
pub use evaluate::{
    evaluate_action, evaluate_claim, obligation_flag, ActionEvaluation, ClaimEvaluation,
    OBLIGATION_FLAG_PREFIX,
};
pub use parser::{parse_claim, parse_claims, CallerIntent, ClaimParser, RuleBasedParser};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("version '{0}' is not semver: {1}")]
    InvalidVersion(String, String),
    #[error("policy version {new} does not follow {old}")]
    VersionOrder { old: String, new: String },
}
