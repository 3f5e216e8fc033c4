//! Executable model of the per (caller, callee) consent lifecycle and a
//! bounded exhaustive explorer over it.
//!
//! The model tracks abstract records and events carrying only the fields
//! the safety properties read. Skill calls are logged with the consent
//! record and adherence event that authorized them so every property is a
//! predicate over a single state.

mod explore;
mod liveness;
mod safety;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AdherenceDecision, ConsentDecision};

pub use explore::{
    explore, replay, report_for, state_key, BfsTree, ExplorationReport, ExploreError,
    ExploreOptions, ExploreOrder, PropertyStatus, PropertyViolation, StateGraph, StateSummary,
};
pub use liveness::{check_liveness, LivenessReport, LivenessViolation};
pub use safety::{check_safety, check_transition, Property};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LifecycleState {
    Idle,
    PolicyFetched,
    GovernanceReview,
    Accepted,
    Rejected,
    Conditional,
    Stale,
}

impl LifecycleState {
    pub fn is_decided(self) -> bool {
        matches!(
            self,
            LifecycleState::Accepted | LifecycleState::Rejected | LifecycleState::Conditional
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaleCause {
    PolicyBump,
    CapabilityChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbstractRecord {
    pub decision: ConsentDecision,
    pub policy_version: u32,
    pub capability_version: u32,
    pub disputed_claim_present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbstractEvent {
    pub decision: AdherenceDecision,
    pub claim_disputed: bool,
    pub consent_index: usize,
}

/// One executed skill call and what authorized it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillCall {
    pub consent_index: Option<usize>,
    pub event_index: Option<usize>,
    pub capability_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub lifecycle: LifecycleState,
    pub policy_version: u32,
    pub capability_version: u32,
    pub consent_chain: Vec<AbstractRecord>,
    pub adherence_trail: Vec<AbstractEvent>,
    pub skill_calls: Vec<SkillCall>,
    pub pending_stale_cause: Option<StaleCause>,
}

impl SystemState {
    pub fn initial() -> Self {
        SystemState {
            lifecycle: LifecycleState::Idle,
            policy_version: 1,
            capability_version: 1,
            consent_chain: Vec::new(),
            adherence_trail: Vec::new(),
            skill_calls: Vec::new(),
            pending_stale_cause: None,
        }
    }

    pub fn skill_call_count(&self) -> usize {
        self.skill_calls.len()
    }

    fn tail_index(&self) -> Option<usize> {
        self.consent_chain.len().checked_sub(1)
    }

    /// Tail record when it was made under the current versions.
    fn current_tail(&self) -> Option<(usize, &AbstractRecord)> {
        let i = self.tail_index()?;
        let r = &self.consent_chain[i];
        (r.policy_version == self.policy_version && r.capability_version == self.capability_version)
            .then_some((i, r))
    }

    fn epoch_events(&self, consent_index: usize) -> usize {
        self.adherence_trail
            .iter()
            .filter(|e| e.consent_index == consent_index)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LifecycleEvent {
    FetchPolicy,
    RequestReview,
    Accept,
    Reject,
    ConditionalAccept,
    PublishVersion,
    CapabilityBump,
    RecordAdherence {
        decision: AdherenceDecision,
        claim_disputed: bool,
    },
    InvokeSkill,
}

impl LifecycleEvent {
    /// Whether the event appends a consent record.
    pub fn appends_consent(self) -> bool {
        matches!(
            self,
            LifecycleEvent::Accept | LifecycleEvent::Reject | LifecycleEvent::ConditionalAccept
        )
    }
}

impl fmt::Display for LifecycleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LifecycleEvent::RecordAdherence {
                decision,
                claim_disputed,
            } => write!(
                f,
                "RecordAdherence({}, {})",
                decision.as_str(),
                if *claim_disputed {
                    "disputed"
                } else {
                    "undisputed"
                }
            ),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationBounds {
    pub max_versions: u32,
    pub max_adherence_events: u32,
    pub max_cap_versions: u32,
}

impl ExplorationBounds {
    pub const REFERENCE: ExplorationBounds = ExplorationBounds {
        max_versions: 3,
        max_adherence_events: 4,
        max_cap_versions: 2,
    };

    pub fn new(
        max_versions: u32,
        max_adherence_events: u32,
        max_cap_versions: u32,
    ) -> Result<Self, BoundsError> {
        let bounds = ExplorationBounds {
            max_versions,
            max_adherence_events,
            max_cap_versions,
        };
        if max_versions == 0 || max_adherence_events == 0 || max_cap_versions == 0 {
            return Err(BoundsError(bounds));
        }
        Ok(bounds)
    }
}

impl Default for ExplorationBounds {
    fn default() -> Self {
        Self::REFERENCE
    }
}

#[derive(Debug, Error)]
#[error("exploration bounds must all be at least 1, got {0:?}")]
pub struct BoundsError(pub ExplorationBounds);

/// Deliberate defects for checking that the explorer finds violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// InvokeSkill is also enabled while the tail record is a rejection.
    SkillFromRejected,
    /// A disputed claim may be recorded with a permit decision.
    PermitOnDisputed,
    /// InvokeSkill stays enabled after a capability bump.
    SkillUnderCapabilityDrift,
    /// FetchPolicy is not enabled from Stale.
    NoFetchFromStale,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::SkillFromRejected,
        Mutation::PermitOnDisputed,
        Mutation::SkillUnderCapabilityDrift,
        Mutation::NoFetchFromStale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mutation::SkillFromRejected => "skill_from_rejected",
            Mutation::PermitOnDisputed => "permit_on_disputed",
            Mutation::SkillUnderCapabilityDrift => "skill_under_capability_drift",
            Mutation::NoFetchFromStale => "no_fetch_from_stale",
        }
    }
}

impl std::str::FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| {
                let known: Vec<_> = Mutation::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown mutation '{s}' (known: {})", known.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{event} is not enabled in {state:?}")]
pub struct TransitionError {
    pub event: LifecycleEvent,
    pub state: LifecycleState,
}

/// Bounds, extension flag and injected defects: the transition relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleModel {
    pub bounds: ExplorationBounds,
    pub governance_tiering: bool,
    #[serde(default)]
    pub mutations: Vec<Mutation>,
}

const ADHERENCE_DECISIONS: [AdherenceDecision; 3] = [
    AdherenceDecision::Permit,
    AdherenceDecision::Deny,
    AdherenceDecision::Escalate,
];

impl LifecycleModel {
    pub fn new(bounds: ExplorationBounds) -> Self {
        LifecycleModel {
            bounds,
            ..Self::default()
        }
    }

    pub fn with_governance_tiering(mut self, on: bool) -> Self {
        self.governance_tiering = on;
        self
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        if !self.mutations.contains(&mutation) {
            self.mutations.push(mutation);
        }
        self
    }

    fn mutated(&self, mutation: Mutation) -> bool {
        self.mutations.contains(&mutation)
    }

    /// Events whose guards hold in `s`, in a fixed order.
    pub fn enabled_events(&self, s: &SystemState) -> Vec<LifecycleEvent> {
        use LifecycleEvent::*;
        use LifecycleState as L;

        let mut out = Vec::new();
        let stale_fetch = s.lifecycle == L::Stale && !self.mutated(Mutation::NoFetchFromStale);
        if s.lifecycle == L::Idle || stale_fetch {
            out.push(FetchPolicy);
        }
        if self.governance_tiering && s.lifecycle == L::PolicyFetched {
            out.push(RequestReview);
        }
        if matches!(s.lifecycle, L::PolicyFetched | L::GovernanceReview) {
            out.extend([Accept, Reject, ConditionalAccept]);
        }
        if s.lifecycle.is_decided() {
            if s.policy_version < self.bounds.max_versions {
                out.push(PublishVersion);
            }
            if s.capability_version < self.bounds.max_cap_versions {
                out.push(CapabilityBump);
            }
        }
        if matches!(s.lifecycle, L::Accepted | L::Conditional) {
            if let Some((i, tail)) = s.current_tail() {
                if (s.epoch_events(i) as u32) < self.bounds.max_adherence_events {
                    for decision in ADHERENCE_DECISIONS {
                        out.push(RecordAdherence {
                            decision,
                            claim_disputed: false,
                        });
                    }
                    if tail.disputed_claim_present {
                        for decision in ADHERENCE_DECISIONS {
                            if decision != AdherenceDecision::Permit
                                || self.mutated(Mutation::PermitOnDisputed)
                            {
                                out.push(RecordAdherence {
                                    decision,
                                    claim_disputed: true,
                                });
                            }
                        }
                    }
                }
            }
        }
        if self.skill_enabled(s) {
            out.push(InvokeSkill);
        }
        out
    }

    fn skill_enabled(&self, s: &SystemState) -> bool {
        use LifecycleState as L;
        if s.lifecycle == L::Rejected && self.mutated(Mutation::SkillFromRejected) {
            // one unauthorized call per rejection keeps the space finite
            return s
                .current_tail()
                .is_some_and(|(i, _)| !s.skill_calls.iter().any(|c| c.consent_index == Some(i)));
        }
        let drifted = s.lifecycle == L::Stale
            && s.pending_stale_cause == Some(StaleCause::CapabilityChange)
            && self.mutated(Mutation::SkillUnderCapabilityDrift);
        if !matches!(s.lifecycle, L::Accepted | L::Conditional) && !drifted {
            return false;
        }
        let Some(i) = s.tail_index() else {
            return false;
        };
        let tail = &s.consent_chain[i];
        if !tail.decision.grants_access() || tail.policy_version != s.policy_version {
            return false;
        }
        if tail.capability_version != s.capability_version && !drifted {
            return false;
        }
        // the permit immediately before the call authorizes exactly one call
        let Some(e) = s.adherence_trail.len().checked_sub(1) else {
            return false;
        };
        let event = &s.adherence_trail[e];
        event.consent_index == i
            && event.decision == AdherenceDecision::Permit
            && !event.claim_disputed
            && !s.skill_calls.iter().any(|c| c.event_index == Some(e))
    }

    pub fn step(
        &self,
        s: &SystemState,
        event: LifecycleEvent,
    ) -> Result<SystemState, TransitionError> {
        if !self.enabled_events(s).contains(&event) {
            return Err(TransitionError {
                event,
                state: s.lifecycle,
            });
        }
        Ok(self.apply(s, event))
    }

    /// Applies `event` without checking its guard.
    fn apply(&self, s: &SystemState, event: LifecycleEvent) -> SystemState {
        use LifecycleEvent::*;
        use LifecycleState as L;

        let mut next = s.clone();
        let decide = |next: &mut SystemState, decision, state, disputed| {
            next.consent_chain.push(AbstractRecord {
                decision,
                policy_version: next.policy_version,
                capability_version: next.capability_version,
                disputed_claim_present: disputed,
            });
            next.lifecycle = state;
            next.pending_stale_cause = None;
        };
        match event {
            FetchPolicy => next.lifecycle = L::PolicyFetched,
            RequestReview => next.lifecycle = L::GovernanceReview,
            Accept => decide(&mut next, ConsentDecision::Accepted, L::Accepted, false),
            Reject => decide(&mut next, ConsentDecision::Rejected, L::Rejected, true),
            ConditionalAccept => decide(
                &mut next,
                ConsentDecision::Conditional,
                L::Conditional,
                true,
            ),
            PublishVersion => {
                next.policy_version += 1;
                next.lifecycle = L::Stale;
                next.pending_stale_cause = Some(StaleCause::PolicyBump);
            }
            CapabilityBump => {
                next.capability_version += 1;
                next.lifecycle = L::Stale;
                next.pending_stale_cause = Some(StaleCause::CapabilityChange);
            }
            RecordAdherence {
                decision,
                claim_disputed,
            } => {
                let consent_index = s.tail_index().expect("guard requires a tail record");
                next.adherence_trail.push(AbstractEvent {
                    decision,
                    claim_disputed,
                    consent_index,
                });
            }
            InvokeSkill => next.skill_calls.push(SkillCall {
                consent_index: s.tail_index(),
                event_index: s.adherence_trail.len().checked_sub(1),
                capability_version: s.capability_version,
            }),
        }
        next
    }
}

/// [`LifecycleModel::step`] at the reference bounds without extensions.
pub fn step(s: &SystemState, event: LifecycleEvent) -> Result<SystemState, TransitionError> {
    LifecycleModel::default().step(s, event)
}

/// [`LifecycleModel::enabled_events`] at the reference bounds without extensions.
pub fn enabled_events(s: &SystemState) -> Vec<LifecycleEvent> {
    LifecycleModel::default().enabled_events(s)
}
