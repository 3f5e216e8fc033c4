//! Structural checks on individual documents and records.

use std::collections::{HashMap, HashSet};

use semver::Version;

use crate::hash::compute_policy_hash;
use crate::model::{ConsentDecision, ConsentRecord, PolicyDocument};
use crate::report::{codes, ValidationReport};

pub fn validate_document(doc: &PolicyDocument) -> ValidationReport {
    let mut report = ValidationReport::new();

    let version = match Version::parse(&doc.version) {
        Ok(v) => Some(v),
        Err(e) => {
            report.push(
                codes::INVALID_VERSION,
                None,
                format!("version '{}' is not semver: {e}", doc.version),
            );
            None
        }
    };

    if let Some(supersedes) = &doc.supersedes {
        match Version::parse(supersedes) {
            Ok(prior) => {
                if version.as_ref().is_some_and(|v| &prior >= v) {
                    report.push(
                        codes::SUPERSEDES_NOT_OLDER,
                        None,
                        format!("supersedes {supersedes} is not older than {}", doc.version),
                    );
                }
            }
            Err(e) => report.push(
                codes::INVALID_VERSION,
                None,
                format!("supersedes '{supersedes}' is not semver: {e}"),
            ),
        }
    }

    if doc.effective_date.parse().is_none() {
        report.push(
            codes::INVALID_TIMESTAMP,
            None,
            format!(
                "effective_date '{}' is not an ISO 8601 UTC timestamp",
                doc.effective_date
            ),
        );
    }

    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (i, claim) in doc.claims.iter().enumerate() {
        if claim.id.is_empty() {
            report.push(codes::EMPTY_CLAIM_ID, Some(i), "claim id is empty");
        } else if let Some(first) = first_seen.insert(claim.id.as_str(), i) {
            // keep the first position for later duplicates
            first_seen.insert(claim.id.as_str(), first);
            report.push(
                codes::DUPLICATE_CLAIM_ID,
                Some(i),
                format!(
                    "claim id '{}' appears at positions {first} and {i}",
                    claim.id
                ),
            );
        }
        match Version::parse(&claim.since_version) {
            Ok(since) => {
                if version.as_ref().is_some_and(|v| &since > v) {
                    report.push(
                        codes::SINCE_VERSION_AHEAD,
                        Some(i),
                        format!(
                            "claim '{}' since_version {} is later than document version {}",
                            claim.id, claim.since_version, doc.version
                        ),
                    );
                }
            }
            Err(e) => report.push(
                codes::INVALID_VERSION,
                Some(i),
                format!("claim '{}' since_version is not semver: {e}", claim.id),
            ),
        }
        if let Some(problem) = claim.constraint.as_ref().and_then(|c| c.shape_error()) {
            report.push(
                codes::INVALID_CONSTRAINT,
                Some(i),
                format!("claim '{}': {problem}", claim.id),
            );
        }
    }

    match compute_policy_hash(doc) {
        Ok(computed) if computed == doc.hash => {}
        Ok(computed) => report.push(
            codes::HASH_MISMATCH,
            None,
            format!(
                "stored hash '{}' but content hashes to '{computed}'",
                doc.hash
            ),
        ),
        Err(e) => report.push(codes::CANONICALIZATION_ERROR, None, e.to_string()),
    }

    report
}

/// Checks a consent record against the document it claims to cover: one
/// parsed claim per policy claim, matching version and hash, and a decision
/// consistent with the parsed claims.
pub fn validate_consent_record(record: &ConsentRecord, doc: &PolicyDocument) -> ValidationReport {
    let mut report = ValidationReport::new();
    check_policy_binding(record, doc, &mut report);
    check_completeness(record, doc, &mut report);
    report.extend(validate_record_shape(record));
    report
}

fn check_policy_binding(
    record: &ConsentRecord,
    doc: &PolicyDocument,
    report: &mut ValidationReport,
) {
    if record.policy_hash != doc.hash {
        report.push(
            codes::HASH_MISMATCH,
            None,
            format!(
                "record binds policy hash '{}' but the document hash is '{}'",
                record.policy_hash, doc.hash
            ),
        );
    }
    if record.policy_version != doc.version {
        report.push(
            codes::POLICY_VERSION_MISMATCH,
            None,
            format!(
                "record binds version {} but the document is version {}",
                record.policy_version, doc.version
            ),
        );
    }
}

/// Parsed claim ids must equal the document's claim ids as a multiset.
pub fn check_completeness(
    record: &ConsentRecord,
    doc: &PolicyDocument,
    report: &mut ValidationReport,
) {
    let expected: HashSet<&str> = doc.claim_ids().collect();
    let mut seen: HashSet<&str> = HashSet::with_capacity(record.parsed_claims.len());
    for parsed in &record.parsed_claims {
        let id = parsed.claim_id.as_str();
        if !expected.contains(id) {
            report.push(
                codes::UNEXPECTED_PARSED_CLAIM,
                None,
                format!("parsed claim '{id}' is not in policy {}", doc.version),
            );
        } else if !seen.insert(id) {
            report.push(
                codes::DUPLICATE_PARSED_CLAIM,
                None,
                format!("claim '{id}' is parsed more than once"),
            );
        }
    }
    let missing: Vec<&str> = doc.claim_ids().filter(|id| !seen.contains(id)).collect();
    if !missing.is_empty() {
        report.push(
            codes::INCOMPLETE_PARSED_CLAIMS,
            None,
            format!("no parsed claim for: {}", missing.join(", ")),
        );
    }
}

/// Document-independent record invariants.
pub fn validate_record_shape(record: &ConsentRecord) -> ValidationReport {
    let mut report = ValidationReport::new();
    let disputed = record.parsed_claims.iter().filter(|p| p.disputed).count();
    let total = record.parsed_claims.len();
    match record.decision {
        ConsentDecision::Accepted if disputed > 0 => report.push(
            codes::INCOHERENT_DECISION,
            None,
            format!("accepted record disputes {disputed} claim(s)"),
        ),
        ConsentDecision::Conditional if disputed == 0 || disputed == total => report.push(
            codes::INCOHERENT_DECISION,
            None,
            format!("conditional record must mix disputed and undisputed claims ({disputed} of {total} disputed)"),
        ),
        _ => {}
    }
    for parsed in &record.parsed_claims {
        if parsed.disputed && parsed.dispute_reason.as_deref().is_none_or(str::is_empty) {
            report.push(
                codes::MISSING_DISPUTE_REASON,
                None,
                format!("claim '{}' is disputed without a reason", parsed.claim_id),
            );
        }
    }
    if record.prev_id.is_some() != record.reconsent_trigger.is_some() {
        report.push(
            codes::INVALID_RECONSENT_TRIGGER,
            None,
            "reconsent_trigger must be set exactly when prev_id is set",
        );
    }
    if record.timestamp.parse().is_none() {
        report.push(
            codes::INVALID_TIMESTAMP,
            None,
            format!(
                "timestamp '{}' is not an ISO 8601 UTC timestamp",
                record.timestamp
            ),
        );
    }
    report
}
