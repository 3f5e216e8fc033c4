use std::fmt;

use serde::{Deserialize, Serialize};

use super::SystemState;
use crate::model::AdherenceDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    L1,
    L2,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::S1,
        Property::S2,
        Property::S3,
        Property::S4,
        Property::S5,
        Property::S6,
        Property::S7,
        Property::L1,
        Property::L2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::S1 => "NoSkillWithoutConsent",
            Property::S2 => "ChainMonotonicity",
            Property::S3 => "AdherenceAnchored",
            Property::S4 => "SkillRequiresPermit",
            Property::S5 => "ConditionalGating",
            Property::S6 => "NoDisputedPermit",
            Property::S7 => "NoSkillOnCapabilityDrift",
            Property::L1 => "EventualReConsent",
            Property::L2 => "EventualCapReConsent",
        }
    }

    pub fn is_liveness(self) -> bool {
        matches!(self, Property::L1 | Property::L2)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// State properties violated by `s`; S2 is a transition property and is
/// checked by [`check_transition`].
pub fn check_safety(s: &SystemState) -> Vec<Property> {
    let mut out = Vec::new();
    let record = |i: Option<usize>| i.and_then(|i| s.consent_chain.get(i));

    // each call is governed by a granting record
    if s.skill_calls
        .iter()
        .any(|c| !record(c.consent_index).is_some_and(|r| r.decision.grants_access()))
    {
        out.push(Property::S1);
    }
    if s.adherence_trail
        .iter()
        .any(|e| e.consent_index >= s.consent_chain.len())
    {
        out.push(Property::S3);
    }
    let authorized = |c: &super::SkillCall| {
        c.event_index
            .and_then(|i| s.adherence_trail.get(i))
            .is_some_and(|e| {
                e.decision == AdherenceDecision::Permit
                    && !e.claim_disputed
                    && Some(e.consent_index) == c.consent_index
            })
    };
    if !s.skill_calls.iter().all(authorized) {
        out.push(Property::S4);
    }
    let disputed_permit = s
        .adherence_trail
        .iter()
        .any(|e| e.claim_disputed && e.decision == AdherenceDecision::Permit);
    if s.adherence_trail.iter().any(|e| {
        e.claim_disputed
            && !matches!(
                e.decision,
                AdherenceDecision::Deny | AdherenceDecision::Escalate
            )
    }) {
        out.push(Property::S5);
    }
    if disputed_permit {
        out.push(Property::S6);
    }
    if s.skill_calls.iter().any(|c| {
        record(c.consent_index).is_some_and(|r| r.capability_version != c.capability_version)
    }) {
        out.push(Property::S7);
    }
    out
}

/// S2 on one edge: every list in `before` is a prefix of its counterpart
/// in `after`.
pub fn check_transition(before: &SystemState, after: &SystemState) -> bool {
    after.consent_chain.starts_with(&before.consent_chain)
        && after.adherence_trail.starts_with(&before.adherence_trail)
        && after.skill_calls.starts_with(&before.skill_calls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifecycle::{AbstractEvent, AbstractRecord, SkillCall};
    use crate::model::ConsentDecision;

    #[test]
    fn initial_state_is_clean() {
        assert!(check_safety(&SystemState::initial()).is_empty());
    }

    #[test]
    fn skill_call_without_consent() {
        let mut s = SystemState::initial();
        s.skill_calls.push(SkillCall {
            consent_index: None,
            event_index: None,
            capability_version: 1,
        });
        assert_eq!(check_safety(&s), vec![Property::S1, Property::S4]);
    }

    #[test]
    fn permit_on_disputed_claim() {
        let mut s = SystemState::initial();
        s.consent_chain.push(AbstractRecord {
            decision: ConsentDecision::Conditional,
            policy_version: 1,
            capability_version: 1,
            disputed_claim_present: true,
        });
        s.adherence_trail.push(AbstractEvent {
            decision: AdherenceDecision::Permit,
            claim_disputed: true,
            consent_index: 0,
        });
        assert_eq!(check_safety(&s), vec![Property::S5, Property::S6]);
    }

    #[test]
    fn dangling_event_and_drifted_call() {
        let mut s = SystemState::initial();
        s.consent_chain.push(AbstractRecord {
            decision: ConsentDecision::Accepted,
            policy_version: 1,
            capability_version: 1,
            disputed_claim_present: false,
        });
        s.adherence_trail.push(AbstractEvent {
            decision: AdherenceDecision::Permit,
            claim_disputed: false,
            consent_index: 0,
        });
        s.skill_calls.push(SkillCall {
            consent_index: Some(0),
            event_index: Some(0),
            capability_version: 2,
        });
        assert_eq!(check_safety(&s), vec![Property::S7]);
        s.adherence_trail[0].consent_index = 3;
        assert_eq!(
            check_safety(&s),
            vec![Property::S3, Property::S4, Property::S7]
        );
    }

    #[test]
    fn shrinking_edge_breaks_monotonicity() {
        let mut a = SystemState::initial();
        a.consent_chain.push(AbstractRecord {
            decision: ConsentDecision::Accepted,
            policy_version: 1,
            capability_version: 1,
            disputed_claim_present: false,
        });
        let b = SystemState::initial();
        assert!(check_transition(&b, &a));
        assert!(!check_transition(&a, &b));
    }
}
