//! Request and response bodies shared by the callee service and the caller
//! client.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use acap_core::{AdherenceDecision, AdherenceEvent, ScalarMap, Violation};

use crate::card::AdherenceMode;

/// Error codes that are not validator violations.
pub mod codes {
    pub const CONSENT_REQUIRED: &str = "consent_required";
    pub const CLAIMS_BLOCKED: &str = "claims_blocked";
    pub const STALE_CONSENT: &str = "stale_consent";
    pub const ADHERENCE_REQUIRED: &str = "adherence_required";
    pub const CONSENT_REJECTED: &str = "consent_rejected";
    pub const LINK_CONFLICT: &str = "link_conflict";
    pub const ADHERENCE_REJECTED: &str = "adherence_rejected";
    pub const WRONG_CALLEE: &str = "wrong_callee";
    pub const UNKNOWN_SKILL: &str = "unknown_skill";
    pub const POLICY_UNAVAILABLE: &str = "policy_unavailable";
    pub const MALFORMED_BODY: &str = "malformed_body";
    pub const STORAGE_ERROR: &str = "storage_error";
}

/// Why a skill call was refused at the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateCode {
    ConsentRequired,
    ClaimsBlocked,
    StaleConsent,
    AdherenceRequired,
}

impl GateCode {
    pub fn as_str(self) -> &'static str {
        match self {
            GateCode::ConsentRequired => codes::CONSENT_REQUIRED,
            GateCode::ClaimsBlocked => codes::CLAIMS_BLOCKED,
            GateCode::StaleConsent => codes::STALE_CONSENT,
            GateCode::AdherenceRequired => codes::ADHERENCE_REQUIRED,
        }
    }

    fn from_code(code: &str) -> Option<Self> {
        [
            GateCode::ConsentRequired,
            GateCode::ClaimsBlocked,
            GateCode::StaleConsent,
            GateCode::AdherenceRequired,
        ]
        .into_iter()
        .find(|g| g.as_str() == code)
    }
}

/// Structured gate refusal. `blocking_claims` is non-empty exactly for
/// `claims_blocked`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillGateError {
    pub code: GateCode,
    #[serde(default)]
    pub blocking_claims: Vec<String>,
    pub detail: String,
}

impl SkillGateError {
    pub fn new(code: GateCode, detail: impl Into<String>) -> Self {
        SkillGateError {
            code,
            blocking_claims: Vec::new(),
            detail: detail.into(),
        }
    }

    pub fn blocked(claims: Vec<String>) -> Self {
        debug_assert!(!claims.is_empty());
        SkillGateError {
            code: GateCode::ClaimsBlocked,
            detail: format!("skill is governed by blocked claims: {}", claims.join(", ")),
            blocking_claims: claims,
        }
    }
}

impl fmt::Display for SkillGateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.detail)
    }
}

impl std::error::Error for SkillGateError {}

/// JSON body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocking_claims: Vec<String>,
    /// Every failed check, for validation rejections.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ErrorBody {
    pub fn new(code: &str, detail: impl Into<String>) -> Self {
        ErrorBody {
            code: code.to_owned(),
            detail: detail.into(),
            blocking_claims: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn has_violation(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn gate(&self) -> Option<SkillGateError> {
        Some(SkillGateError {
            code: GateCode::from_code(&self.code)?,
            blocking_claims: self.blocking_claims.clone(),
            detail: self.detail.clone(),
        })
    }
}

impl From<SkillGateError> for ErrorBody {
    fn from(e: SkillGateError) -> Self {
        ErrorBody {
            code: e.code.as_str().to_owned(),
            detail: e.detail,
            blocking_claims: e.blocking_claims,
            violations: Vec::new(),
        }
    }
}

impl fmt::Display for ErrorBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stored {
    Appended,
    AlreadyPresent,
}

impl From<acap_core::chain::AppendOutcome> for Stored {
    fn from(o: acap_core::chain::AppendOutcome) -> Self {
        match o {
            acap_core::chain::AppendOutcome::Appended => Stored::Appended,
            acap_core::chain::AppendOutcome::AlreadyPresent => Stored::AlreadyPresent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentAck {
    pub record_id: String,
    pub chain_length: usize,
    pub stored: Stored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceAck {
    pub event_id: String,
    pub mode: AdherenceMode,
    /// Binding decision: the caller's in local mode, the callee's in
    /// delegated mode.
    pub decision: AdherenceDecision,
    pub stored: Stored,
    /// The event exactly as appended to the trail.
    pub event: AdherenceEvent,
}

/// Body of `POST /skills/{name}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRequest {
    pub caller: String,
    /// Permit event authorizing this call.
    #[serde(default)]
    pub adherence_event_id: Option<String>,
    /// The caller's current capability fingerprint.
    pub caller_capability_hash: String,
    #[serde(default)]
    pub context: ScalarMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillResponse {
    pub skill: String,
    pub consent_record_id: String,
    /// The adherence event that authorized the call.
    pub authorized_by: String,
    pub result: Value,
}
