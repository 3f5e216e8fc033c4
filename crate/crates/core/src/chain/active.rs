use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ConsentChain;
use crate::model::{ConsentDecision, ConsentRecord, PolicyDocument, ReconsentTrigger, ValidUntil};

/// Why the tail record no longer covers the current session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaleReason {
    PolicyChanged,
    CapabilityChanged,
    Expired,
}

impl StaleReason {
    /// Trigger to stamp on the re-consent record. Expiry has no trigger of
    /// its own and follows the policy-bump flow.
    pub fn trigger(self) -> ReconsentTrigger {
        match self {
            StaleReason::PolicyChanged | StaleReason::Expired => ReconsentTrigger::PolicyBump,
            StaleReason::CapabilityChanged => ReconsentTrigger::CapabilityChange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsentStatus<'a> {
    /// No record exists for the pair.
    Missing,
    /// The tail is current but rejects the policy.
    NotGranted(&'a ConsentRecord),
    Stale {
        record: &'a ConsentRecord,
        reason: StaleReason,
    },
    Active(&'a ConsentRecord),
}

impl<'a> ConsentStatus<'a> {
    pub fn active(self) -> Option<&'a ConsentRecord> {
        match self {
            ConsentStatus::Active(r) => Some(r),
            _ => None,
        }
    }

    pub fn tail(self) -> Option<&'a ConsentRecord> {
        match self {
            ConsentStatus::Missing => None,
            ConsentStatus::NotGranted(r) | ConsentStatus::Active(r) => Some(r),
            ConsentStatus::Stale { record, .. } => Some(record),
        }
    }
}

/// Classifies the tail of `records` against the current policy and
/// capability. Only the tail counts: earlier records are history.
pub fn consent_status<'a>(
    records: &'a [ConsentRecord],
    policy: &PolicyDocument,
    capability_hash: &str,
    now: DateTime<Utc>,
) -> ConsentStatus<'a> {
    let Some(tail) = records.last() else {
        return ConsentStatus::Missing;
    };
    let reason = if tail.policy_hash != policy.hash {
        Some(StaleReason::PolicyChanged)
    } else if tail.valid_until.tracks_capability() && tail.caller_capability_hash != capability_hash
    {
        Some(StaleReason::CapabilityChanged)
    } else if let ValidUntil::At(deadline) = &tail.valid_until {
        // an unreadable deadline cannot be honoured, so it has passed
        deadline
            .parse()
            .is_none_or(|d| now > d)
            .then_some(StaleReason::Expired)
    } else {
        None
    };
    match reason {
        Some(reason) => ConsentStatus::Stale {
            record: tail,
            reason,
        },
        None if tail.decision == ConsentDecision::Rejected => ConsentStatus::NotGranted(tail),
        None => ConsentStatus::Active(tail),
    }
}

/// The tail record, if it currently grants access.
pub fn active_consent<'a>(
    chain: &'a ConsentChain,
    policy: &PolicyDocument,
    capability_hash: &str,
    now: DateTime<Utc>,
) -> Option<&'a ConsentRecord> {
    consent_status(chain.records(), policy, capability_hash, now).active()
}
