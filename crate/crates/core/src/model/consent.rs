use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::timestamp::Timestamp;

/// The caller's verdict on one policy claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedClaim {
    pub claim_id: String,
    pub understood: bool,
    pub disputed: bool,
    #[serde(default)]
    pub dispute_reason: Option<String>,
}

impl ParsedClaim {
    pub fn accepted(claim_id: impl Into<String>) -> Self {
        ParsedClaim {
            claim_id: claim_id.into(),
            understood: true,
            disputed: false,
            dispute_reason: None,
        }
    }

    pub fn disputed(claim_id: impl Into<String>, reason: impl Into<String>) -> Self {
        ParsedClaim {
            claim_id: claim_id.into(),
            understood: true,
            disputed: true,
            dispute_reason: Some(reason.into()),
        }
    }

    /// Disputed or not understood: skills governed by this claim are gated.
    pub fn is_blocking(&self) -> bool {
        self.disputed || !self.understood
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsentDecision {
    Accepted,
    Rejected,
    Conditional,
}

impl ConsentDecision {
    /// Accepted or conditional.
    pub fn grants_access(self) -> bool {
        matches!(
            self,
            ConsentDecision::Accepted | ConsentDecision::Conditional
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConsentDecision::Accepted => "accepted",
            ConsentDecision::Rejected => "rejected",
            ConsentDecision::Conditional => "conditional",
        }
    }
}

impl fmt::Display for ConsentDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a new record superseded the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReconsentTrigger {
    PolicyBump,
    CapabilityChange,
    PrincipalChange,
}

impl ReconsentTrigger {
    pub fn as_str(self) -> &'static str {
        match self {
            ReconsentTrigger::PolicyBump => "POLICY_BUMP",
            ReconsentTrigger::CapabilityChange => "CAPABILITY_CHANGE",
            ReconsentTrigger::PrincipalChange => "PRINCIPAL_CHANGE",
        }
    }
}

impl fmt::Display for ReconsentTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Expiry of a consent record: a concrete instant or one of three
/// invalidation sentinels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidUntil {
    OnVersionBump,
    OnCapabilityChange,
    OnAnyChange,
    At(Timestamp),
}

impl ValidUntil {
    pub fn as_str(&self) -> &str {
        match self {
            ValidUntil::OnVersionBump => "on_version_bump",
            ValidUntil::OnCapabilityChange => "on_capability_change",
            ValidUntil::OnAnyChange => "on_any_change",
            ValidUntil::At(t) => t.as_str(),
        }
    }

    /// Whether a caller capability change invalidates the record.
    pub fn tracks_capability(&self) -> bool {
        !matches!(self, ValidUntil::OnVersionBump)
    }
}

impl fmt::Display for ValidUntil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<String> for ValidUntil {
    fn from(s: String) -> Self {
        match s.as_str() {
            "on_version_bump" => ValidUntil::OnVersionBump,
            "on_capability_change" => ValidUntil::OnCapabilityChange,
            "on_any_change" => ValidUntil::OnAnyChange,
            _ => ValidUntil::At(Timestamp::new(s)),
        }
    }
}

impl Serialize for ValidUntil {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ValidUntil {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let v = ValidUntil::from(s);
        if let ValidUntil::At(t) = &v {
            if t.parse().is_none() {
                return Err(serde::de::Error::custom(format!(
                    "valid_until '{t}' is neither a sentinel nor an ISO 8601 UTC timestamp"
                )));
            }
        }
        Ok(v)
    }
}

/// Reserved for external ledger anchoring. Never populated here; omitted
/// from serialized records when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainAnchor {
    pub anchor_uri: String,
    pub anchor_hash: String,
}

/// The caller's per-claim parse and decision for one policy version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub id: String,
    #[serde(default)]
    pub prev_id: Option<String>,
    pub caller: String,
    pub callee: String,
    pub policy_version: String,
    pub policy_hash: String,
    pub parsed_claims: Vec<ParsedClaim>,
    pub decision: ConsentDecision,
    pub timestamp: Timestamp,
    pub valid_until: ValidUntil,
    #[serde(default)]
    pub signature: String,
    pub caller_capability_hash: String,
    #[serde(default)]
    pub reconsent_trigger: Option<ReconsentTrigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_anchor: Option<ChainAnchor>,
}

impl ConsentRecord {
    pub fn parsed(&self, claim_id: &str) -> Option<&ParsedClaim> {
        self.parsed_claims.iter().find(|p| p.claim_id == claim_id)
    }
}
