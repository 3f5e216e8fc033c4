use chrono::{DateTime, Utc};

use acap_core::{ConsentDecision, ConsentRecord, ParsedClaim, ReconsentTrigger, ValidUntil};

use crate::card::AgentCard;

/// Accepted when nothing is disputed, rejected when everything is,
/// conditional otherwise. Claims that are merely not understood do not
/// change the decision; the gate blocks them regardless.
pub fn derive_decision(parsed: &[ParsedClaim]) -> ConsentDecision {
    let disputed = parsed.iter().filter(|p| p.disputed).count();
    if disputed == 0 {
        ConsentDecision::Accepted
    } else if disputed == parsed.len() {
        ConsentDecision::Rejected
    } else {
        ConsentDecision::Conditional
    }
}

/// Which trigger, if any, invalidates `cached`. Precedence is principal,
/// then capability, then policy. A capability change only counts when the
/// record's `valid_until` tracks capability; a changed policy always
/// counts, and an elapsed deadline is handled like a policy bump.
pub fn detect_staleness(
    cached: &ConsentRecord,
    consented_principal: &str,
    fresh_card: &AgentCard,
    current_cap_hash: &str,
    principal_id: &str,
    now: DateTime<Utc>,
) -> Option<ReconsentTrigger> {
    if consented_principal != principal_id {
        return Some(ReconsentTrigger::PrincipalChange);
    }
    if cached.valid_until.tracks_capability() && cached.caller_capability_hash != current_cap_hash {
        return Some(ReconsentTrigger::CapabilityChange);
    }
    let policy = &fresh_card.usage_policy;
    if policy.version != cached.policy_version || policy.document_hash != cached.policy_hash {
        return Some(ReconsentTrigger::PolicyBump);
    }
    if let ValidUntil::At(deadline) = &cached.valid_until {
        if deadline.parse().is_none_or(|d| now > d) {
            return Some(ReconsentTrigger::PolicyBump);
        }
    }
    None
}
