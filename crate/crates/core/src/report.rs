use std::fmt;

use serde::{Deserialize, Serialize};

/// Violation codes shared by every validator.
pub mod codes {
    pub const EMPTY_CLAIM_ID: &str = "empty_claim_id";
    pub const DUPLICATE_CLAIM_ID: &str = "duplicate_claim_id";
    pub const HASH_MISMATCH: &str = "hash_mismatch";
    pub const INVALID_VERSION: &str = "invalid_version";
    pub const SINCE_VERSION_AHEAD: &str = "since_version_ahead";
    pub const SUPERSEDES_NOT_OLDER: &str = "supersedes_not_older";
    pub const INVALID_CONSTRAINT: &str = "invalid_constraint";
    pub const INVALID_TIMESTAMP: &str = "invalid_timestamp";
    pub const CANONICALIZATION_ERROR: &str = "canonicalization_error";

    pub const INCOMPLETE_PARSED_CLAIMS: &str = "incomplete_parsed_claims";
    pub const UNEXPECTED_PARSED_CLAIM: &str = "unexpected_parsed_claim";
    pub const DUPLICATE_PARSED_CLAIM: &str = "duplicate_parsed_claim";
    pub const POLICY_VERSION_MISMATCH: &str = "policy_version_mismatch";
    pub const INCOHERENT_DECISION: &str = "incoherent_decision";
    pub const MISSING_DISPUTE_REASON: &str = "missing_dispute_reason";
    pub const INVALID_RECONSENT_TRIGGER: &str = "invalid_reconsent_trigger";
    pub const UNRESOLVED_POLICY: &str = "unresolved_policy";

    pub const BROKEN_LINK: &str = "broken_link";
    pub const DUPLICATE_ID: &str = "duplicate_id";
    pub const NON_MONOTONIC_TIMESTAMP: &str = "non_monotonic_timestamp";
    pub const INVALID_SIGNATURE: &str = "invalid_signature";
    pub const UNKNOWN_SIGNER: &str = "unknown_signer";

    pub const UNANCHORED_EVENT: &str = "unanchored_event";
    pub const MISSING_REASONING: &str = "missing_reasoning";
    pub const MIXED_TRAIL: &str = "mixed_trail";
    pub const MIXED_CHAIN: &str = "mixed_chain";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    /// Index of the offending item, when the check is positional.
    pub position: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "[{}] at {}: {}", self.code, p, self.detail),
            None => write!(f, "[{}] {}", self.code, self.detail),
        }
    }
}

/// Validation outcome; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, code: &str, position: Option<usize>, detail: impl Into<String>) {
        self.violations.push(Violation {
            code: code.to_owned(),
            position,
            detail: detail.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    /// Copies `other` with every violation pinned to `position`.
    pub fn extend_at(&mut self, other: ValidationReport, position: usize) {
        self.violations
            .extend(other.violations.into_iter().map(|v| Violation {
                position: Some(position),
                ..v
            }));
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn has_at(&self, code: &str, position: usize) -> bool {
        self.violations
            .iter()
            .any(|v| v.code == code && v.position == Some(position))
    }

    pub fn codes(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.code.as_str()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
