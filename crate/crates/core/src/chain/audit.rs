use serde::{Deserialize, Serialize};

use super::{AdherenceTrail, ConsentChain};
use crate::model::{AdherenceEvent, ConsentRecord};

/// Self-contained export of one consent chain and its adherence trails.
///
/// Entries repeat each record's `prev_id` as `prev_record_id` (events:
/// `prev_event_id`) so the linkage reads directly off the document; the
/// embedded record stays byte-for-byte what was signed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditDocument {
    pub caller: String,
    pub callee: String,
    pub consent_chain: Vec<AuditConsentEntry>,
    pub adherence_trails: Vec<AuditTrail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConsentEntry {
    pub prev_record_id: Option<String>,
    pub record: ConsentRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTrail {
    pub consent_record_id: String,
    pub events: Vec<AuditEventEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEventEntry {
    pub prev_event_id: Option<String>,
    pub event: AdherenceEvent,
}

impl AuditDocument {
    pub fn records(&self) -> Vec<ConsentRecord> {
        self.consent_chain
            .iter()
            .map(|e| e.record.clone())
            .collect()
    }

    pub fn trails(&self) -> Vec<AdherenceTrail> {
        self.adherence_trails
            .iter()
            .map(|t| {
                AdherenceTrail::from_events(
                    t.consent_record_id.clone(),
                    t.events.iter().map(|e| e.event.clone()).collect(),
                )
            })
            .collect()
    }

    pub fn event_count(&self) -> usize {
        self.adherence_trails.iter().map(|t| t.events.len()).sum()
    }

    /// Entries whose repeated link disagrees with the embedded record.
    pub fn link_mismatches(&self) -> Vec<String> {
        let records = self
            .consent_chain
            .iter()
            .filter(|e| e.prev_record_id != e.record.prev_id)
            .map(|e| e.record.id.clone());
        let events = self
            .adherence_trails
            .iter()
            .flat_map(|t| &t.events)
            .filter(|e| e.prev_event_id != e.event.prev_id)
            .map(|e| e.event.id.clone());
        records.chain(events).collect()
    }
}

/// Exports `chain` with every trail anchored to one of its records, in
/// chain order. Trails for unknown records and empty trails are omitted.
pub fn export_audit<'a>(
    chain: &ConsentChain,
    trails: impl IntoIterator<Item = &'a AdherenceTrail>,
) -> AuditDocument {
    let trails: Vec<&AdherenceTrail> = trails.into_iter().collect();
    let adherence_trails = chain
        .records()
        .iter()
        .filter_map(|r| trails.iter().find(|t| t.consent_record_id == r.id))
        .filter(|t| !t.is_empty())
        .map(|t| AuditTrail {
            consent_record_id: t.consent_record_id.clone(),
            events: t
                .events()
                .iter()
                .map(|e| AuditEventEntry {
                    prev_event_id: e.prev_id.clone(),
                    event: e.clone(),
                })
                .collect(),
        })
        .collect();
    AuditDocument {
        caller: chain.caller.clone(),
        callee: chain.callee.clone(),
        consent_chain: chain
            .records()
            .iter()
            .map(|r| AuditConsentEntry {
                prev_record_id: r.prev_id.clone(),
                record: r.clone(),
            })
            .collect(),
        adherence_trails,
    }
}
