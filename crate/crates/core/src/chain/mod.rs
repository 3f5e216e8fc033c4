//! Append-only consent chains and adherence trails.
//!
//! A consent chain is the per (caller, callee) list of consent records; an
//! adherence trail is the per consent record list of adherence events. Both
//! are singly linked through `prev_id` and never shrink.

mod active;
mod audit;
mod store;
mod validate;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{AdherenceEvent, ConsentRecord, PolicyDocument};
use crate::report::ValidationReport;
use crate::validate::validate_consent_record;

pub use active::{active_consent, consent_status, ConsentStatus, StaleReason};
pub use audit::{export_audit, AuditConsentEntry, AuditDocument, AuditEventEntry, AuditTrail};
pub use store::{AppendOutcome, ChainStore, StoreError};
pub use validate::{validate_adherence_trail, validate_consent_chain};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("prev_id {found:?} does not link to the current tail {expected:?}")]
    BrokenLink {
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("id '{0}' is already present")]
    DuplicateId(String),
    #[error("record does not belong to this chain: {0}")]
    WrongKey(String),
    #[error("record failed validation: {0}")]
    InvalidRecord(ValidationReport),
    #[error("event references unknown consent record '{0}'")]
    UnanchoredEvent(String),
    #[error("adherence event '{0}' has no reasoning")]
    MissingReasoning(String),
}

impl ChainError {
    /// Link conflicts, as opposed to content problems.
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            ChainError::BrokenLink { .. } | ChainError::DuplicateId(_)
        )
    }
}

/// The consent history between one caller and one callee.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsentChain {
    pub caller: String,
    pub callee: String,
    records: Vec<ConsentRecord>,
}

impl ConsentChain {
    pub fn new(caller: impl Into<String>, callee: impl Into<String>) -> Self {
        ConsentChain {
            caller: caller.into(),
            callee: callee.into(),
            records: Vec::new(),
        }
    }

    /// Wraps already-persisted records without re-checking them; run
    /// [`validate_consent_chain`] over the result when the source is
    /// untrusted.
    pub fn from_records(
        caller: impl Into<String>,
        callee: impl Into<String>,
        records: Vec<ConsentRecord>,
    ) -> Self {
        ConsentChain {
            caller: caller.into(),
            callee: callee.into(),
            records,
        }
    }

    pub fn records(&self) -> &[ConsentRecord] {
        &self.records
    }

    pub fn tail(&self) -> Option<&ConsentRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.records.iter().any(|r| r.id == record_id)
    }

    pub fn get(&self, record_id: &str) -> Option<&ConsentRecord> {
        self.records.iter().find(|r| r.id == record_id)
    }

    /// Appends `record` after validating it against `doc` and the tail link.
    pub fn append(
        &mut self,
        record: ConsentRecord,
        doc: &PolicyDocument,
    ) -> Result<(), ChainError> {
        let report = validate_consent_record(&record, doc);
        if !report.is_valid() {
            return Err(ChainError::InvalidRecord(report));
        }
        self.append_linked(record)
    }

    /// Appends after checking only the key, the link and id uniqueness.
    pub fn append_linked(&mut self, record: ConsentRecord) -> Result<(), ChainError> {
        if record.caller != self.caller || record.callee != self.callee {
            return Err(ChainError::WrongKey(format!(
                "record is ({}, {}) but chain is ({}, {})",
                record.caller, record.callee, self.caller, self.callee
            )));
        }
        if self.contains(&record.id) {
            return Err(ChainError::DuplicateId(record.id));
        }
        let expected = self.tail().map(|r| r.id.clone());
        if record.prev_id != expected {
            return Err(ChainError::BrokenLink {
                expected,
                found: record.prev_id,
            });
        }
        self.records.push(record);
        Ok(())
    }
}

/// The adherence events recorded under one consent record.
#[derive(Debug, Clone, PartialEq)]
pub struct AdherenceTrail {
    pub consent_record_id: String,
    events: Vec<AdherenceEvent>,
}

impl AdherenceTrail {
    pub fn new(consent_record_id: impl Into<String>) -> Self {
        AdherenceTrail {
            consent_record_id: consent_record_id.into(),
            events: Vec::new(),
        }
    }

    pub fn from_events(consent_record_id: impl Into<String>, events: Vec<AdherenceEvent>) -> Self {
        AdherenceTrail {
            consent_record_id: consent_record_id.into(),
            events,
        }
    }

    pub fn events(&self) -> &[AdherenceEvent] {
        &self.events
    }

    pub fn tail(&self) -> Option<&AdherenceEvent> {
        self.events.last()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, event_id: &str) -> Option<&AdherenceEvent> {
        self.events.iter().find(|e| e.id == event_id)
    }

    pub fn append(&mut self, event: AdherenceEvent) -> Result<(), ChainError> {
        if event.consent_record_id != self.consent_record_id {
            return Err(ChainError::WrongKey(format!(
                "event anchors to '{}' but trail is for '{}'",
                event.consent_record_id, self.consent_record_id
            )));
        }
        if event.reasoning.trim().is_empty() {
            return Err(ChainError::MissingReasoning(event.id));
        }
        if self.get(&event.id).is_some() {
            return Err(ChainError::DuplicateId(event.id));
        }
        let expected = self.tail().map(|e| e.id.clone());
        if event.prev_id != expected {
            return Err(ChainError::BrokenLink {
                expected,
                found: event.prev_id,
            });
        }
        self.events.push(event);
        Ok(())
    }
}

/// Ids of claims the record marks disputed or not understood.
pub fn blocked_claims(record: &ConsentRecord) -> BTreeSet<String> {
    record
        .parsed_claims
        .iter()
        .filter(|p| p.is_blocking())
        .map(|p| p.claim_id.clone())
        .collect()
}
