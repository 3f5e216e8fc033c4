#![allow(dead_code)]

use acap_core::{
    AdherenceDecision, AdherenceEvent, ConsentDecision, ConsentRecord, ParsedClaim,
    ReconsentTrigger, Scalar, Timestamp, ValidUntil,
};

pub const RECORD_FIELDS: usize = 17;
pub const EVENT_FIELDS: usize = 12;

/// Changes exactly one field of `r`, chosen by `field`, using `salt` for
/// the new value. May leave `r` unchanged when the salt collides; callers
/// compare before asserting.
pub fn mutate_record(r: &mut ConsentRecord, field: usize, salt: &str) {
    match field % RECORD_FIELDS {
        0 => r.id.push_str(salt),
        1 => {
            r.prev_id = match r.prev_id.take() {
                Some(_) => None,
                None => Some(format!("prev-{salt}")),
            }
        }
        2 => r.caller.push_str(salt),
        3 => r.callee.push_str(salt),
        4 => r.policy_version = format!("{}-{salt}", r.policy_version),
        5 => r.policy_hash.push_str(salt),
        6 => r
            .parsed_claims
            .push(ParsedClaim::accepted(format!("extra-{salt}"))),
        7 => {
            if let Some(p) = r.parsed_claims.first_mut() {
                p.understood = !p.understood;
            }
        }
        8 => {
            if let Some(p) = r.parsed_claims.last_mut() {
                p.disputed = !p.disputed;
                p.dispute_reason = Some(format!("reason {salt}"));
            }
        }
        9 => {
            if let Some(p) = r.parsed_claims.first_mut() {
                p.claim_id.push_str(salt);
            }
        }
        10 => {
            r.decision = match r.decision {
                ConsentDecision::Accepted => ConsentDecision::Rejected,
                ConsentDecision::Rejected => ConsentDecision::Conditional,
                ConsentDecision::Conditional => ConsentDecision::Accepted,
            }
        }
        11 => r.timestamp = Timestamp::new(format!("{}{salt}", r.timestamp)),
        12 => {
            r.valid_until = match r.valid_until {
                ValidUntil::OnAnyChange => ValidUntil::OnVersionBump,
                _ => ValidUntil::OnAnyChange,
            }
        }
        13 => r.caller_capability_hash.push_str(salt),
        14 => {
            r.reconsent_trigger = match r.reconsent_trigger {
                Some(ReconsentTrigger::PrincipalChange) => None,
                Some(_) => Some(ReconsentTrigger::PrincipalChange),
                None => Some(ReconsentTrigger::PolicyBump),
            }
        }
        15 => r.parsed_claims.reverse(),
        _ => {
            if let Some(p) = r.parsed_claims.first_mut() {
                p.dispute_reason = Some(match p.dispute_reason.take() {
                    Some(s) => format!("{s}{salt}"),
                    None => salt.to_owned(),
                });
            }
        }
    }
}

pub fn mutate_event(e: &mut AdherenceEvent, field: usize, salt: &str) {
    match field % EVENT_FIELDS {
        0 => e.id.push_str(salt),
        1 => {
            e.prev_id = match e.prev_id.take() {
                Some(_) => None,
                None => Some(format!("prev-{salt}")),
            }
        }
        2 => e.consent_record_id.push_str(salt),
        3 => e.action.push_str(salt),
        4 => e.claim_id.push_str(salt),
        5 => e.clause_ref.push_str(salt),
        6 => {
            e.decision = match e.decision {
                AdherenceDecision::Permit => AdherenceDecision::Deny,
                AdherenceDecision::Deny => AdherenceDecision::Escalate,
                AdherenceDecision::Escalate => AdherenceDecision::Permit,
            }
        }
        7 => e.reasoning.push_str(salt),
        8 => e.timestamp = Timestamp::new(format!("{}{salt}", e.timestamp)),
        9 => {
            e.context.insert(format!("k-{salt}"), Scalar::from(salt));
        }
        10 => {
            if let Some(v) = e.context.values_mut().next() {
                *v = Scalar::Bool(!matches!(v, Scalar::Bool(true)));
            }
        }
        _ => e.context.clear(),
    }
}
