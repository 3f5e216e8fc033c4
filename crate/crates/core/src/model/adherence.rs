use std::fmt;

use serde::{Deserialize, Serialize};

use super::scalar::ScalarMap;
use super::timestamp::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdherenceDecision {
    Permit,
    Deny,
    Escalate,
}

impl AdherenceDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            AdherenceDecision::Permit => "permit",
            AdherenceDecision::Deny => "deny",
            AdherenceDecision::Escalate => "escalate",
        }
    }

    /// Aggregation rank: deny > escalate > permit.
    pub fn severity(self) -> u8 {
        match self {
            AdherenceDecision::Permit => 0,
            AdherenceDecision::Escalate => 1,
            AdherenceDecision::Deny => 2,
        }
    }
}

impl fmt::Display for AdherenceDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluation of a policy claim for one action attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceEvent {
    pub id: String,
    #[serde(default)]
    pub prev_id: Option<String>,
    pub consent_record_id: String,
    /// Skill or tool name.
    pub action: String,
    pub claim_id: String,
    pub clause_ref: String,
    pub decision: AdherenceDecision,
    pub reasoning: String,
    pub timestamp: Timestamp,
    #[serde(default)]
    pub context: ScalarMap,
    #[serde(default)]
    pub signature: String,
}
