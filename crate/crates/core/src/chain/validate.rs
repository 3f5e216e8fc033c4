use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};

use crate::hash::compute_policy_hash;
use crate::model::{AdherenceEvent, ConsentRecord, PolicyDocument, Timestamp};
use crate::report::{codes, ValidationReport};
use crate::signing::{verify_with_resolver, KeyResolver, Signable, SignatureCheck};
use crate::validate::validate_consent_record;

/// Checks a full consent chain: links, id uniqueness, caller/callee
/// consistency, timestamp order, claim completeness against the document
/// each record binds, and (when `keys` is given) signatures.
///
/// `docs` is searched by computed content hash, so every historical version
/// a record binds must be supplied.
pub fn validate_consent_chain(
    records: &[ConsentRecord],
    docs: &[PolicyDocument],
    keys: Option<&dyn KeyResolver>,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut by_hash: HashMap<String, &PolicyDocument> = HashMap::with_capacity(docs.len());
    for doc in docs {
        match compute_policy_hash(doc) {
            Ok(h) => {
                by_hash.insert(h, doc);
            }
            Err(e) => report.push(
                codes::CANONICALIZATION_ERROR,
                None,
                format!("policy {}: {e}", doc.version),
            ),
        }
    }

    let mut ids: HashSet<&str> = HashSet::with_capacity(records.len());
    let mut last_time: Option<DateTime<Utc>> = None;
    for (i, record) in records.iter().enumerate() {
        if !ids.insert(record.id.as_str()) {
            report.push(
                codes::DUPLICATE_ID,
                Some(i),
                format!("record id '{}' repeats", record.id),
            );
        }
        check_link(
            &mut report,
            i,
            record.prev_id.as_deref(),
            records.get(i.wrapping_sub(1)).map(|r| r.id.as_str()),
        );
        if let Some(first) = records.first() {
            if record.caller != first.caller || record.callee != first.callee {
                report.push(
                    codes::MIXED_CHAIN,
                    Some(i),
                    format!(
                        "record is ({}, {}) but the chain is ({}, {})",
                        record.caller, record.callee, first.caller, first.callee
                    ),
                );
            }
        }
        check_time(&mut report, i, &record.timestamp, &mut last_time);

        match by_hash.get(&record.policy_hash) {
            Some(doc) => report.extend_at(validate_consent_record(record, doc), i),
            None => report.push(
                codes::UNRESOLVED_POLICY,
                Some(i),
                format!(
                    "no supplied policy document hashes to '{}' (version {})",
                    record.policy_hash, record.policy_version
                ),
            ),
        }
        if let Some(keys) = keys {
            check_signature(&mut report, i, record, keys);
        }
    }
    report
}

/// Checks one adherence trail against the consent chain it belongs to.
pub fn validate_adherence_trail(
    events: &[AdherenceEvent],
    chain: &[ConsentRecord],
    keys: Option<&dyn KeyResolver>,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let record_ids: HashSet<&str> = chain.iter().map(|r| r.id.as_str()).collect();
    let mut ids: HashSet<&str> = HashSet::with_capacity(events.len());
    let mut last_time: Option<DateTime<Utc>> = None;
    let anchor = events.first().map(|e| e.consent_record_id.as_str());

    for (i, event) in events.iter().enumerate() {
        if !ids.insert(event.id.as_str()) {
            report.push(
                codes::DUPLICATE_ID,
                Some(i),
                format!("event id '{}' repeats", event.id),
            );
        }
        check_link(
            &mut report,
            i,
            event.prev_id.as_deref(),
            events.get(i.wrapping_sub(1)).map(|e| e.id.as_str()),
        );
        if !record_ids.contains(event.consent_record_id.as_str()) {
            report.push(
                codes::UNANCHORED_EVENT,
                Some(i),
                format!(
                    "consent record '{}' is not in the chain",
                    event.consent_record_id
                ),
            );
        }
        if Some(event.consent_record_id.as_str()) != anchor {
            report.push(
                codes::MIXED_TRAIL,
                Some(i),
                format!(
                    "event anchors to '{}' but the trail starts under '{}'",
                    event.consent_record_id,
                    anchor.unwrap_or_default()
                ),
            );
        }
        if event.reasoning.trim().is_empty() {
            report.push(
                codes::MISSING_REASONING,
                Some(i),
                format!("event '{}' has no reasoning", event.id),
            );
        }
        check_time(&mut report, i, &event.timestamp, &mut last_time);
        if let Some(keys) = keys {
            check_signature(&mut report, i, event, keys);
        }
    }
    report
}

fn check_link(report: &mut ValidationReport, i: usize, prev: Option<&str>, expected: Option<&str>) {
    if prev != expected {
        let shown = |v: Option<&str>| v.map_or_else(|| "null".to_owned(), |s| format!("'{s}'"));
        report.push(
            codes::BROKEN_LINK,
            Some(i),
            format!(
                "prev_id is {} but should be {}",
                shown(prev),
                shown(expected)
            ),
        );
    }
}

fn check_time(
    report: &mut ValidationReport,
    i: usize,
    timestamp: &Timestamp,
    last: &mut Option<DateTime<Utc>>,
) {
    let Some(at) = timestamp.parse() else {
        report.push(
            codes::INVALID_TIMESTAMP,
            Some(i),
            format!("timestamp '{timestamp}' is not an ISO 8601 UTC timestamp"),
        );
        return;
    };
    if let Some(prev) = *last {
        if at < prev {
            report.push(
                codes::NON_MONOTONIC_TIMESTAMP,
                Some(i),
                format!("timestamp {timestamp} precedes its predecessor"),
            );
        }
    }
    *last = Some(at);
}

fn check_signature<R: Signable>(
    report: &mut ValidationReport,
    i: usize,
    item: &R,
    keys: &dyn KeyResolver,
) {
    match verify_with_resolver(item, keys) {
        SignatureCheck::Unsigned | SignatureCheck::Valid => {}
        SignatureCheck::Invalid => report.push(
            codes::INVALID_SIGNATURE,
            Some(i),
            "signature does not verify",
        ),
        SignatureCheck::UnknownSigner(kid) => report.push(
            codes::UNKNOWN_SIGNER,
            Some(i),
            format!("no key for signer '{kid}'"),
        ),
    }
}
