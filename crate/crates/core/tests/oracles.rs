//! Example values cross-checked against independent implementations.
//!
//! Frozen digests were produced by a separate Python canonicalizer
//! (`json.dumps(sort_keys=True, separators=(",", ":"), ensure_ascii=False)`
//! then SHA-256) over the same fixtures; the fixtures are ASCII-keyed with
//! no floats needing ECMAScript formatting beyond `0.2`.

use acap_core::canonical::{canonical_string, canonicalize, CanonicalError};
use acap_core::chain::{validate_adherence_trail, validate_consent_chain};
use acap_core::fixtures::{self, AGGREGATION_CLAIM};
use acap_core::hash::{compute_capability_hash, compute_policy_hash, is_tagged_sha256};
use acap_core::policy::{
    diff_policies, evaluate_claim, evaluate_constraint, parse_claims, ActionContext, CallerIntent,
    ConstraintOutcome,
};
use acap_core::report::codes;
use acap_core::validate::validate_document;
use acap_core::{AdherenceDecision, Constraint, ParsedClaim, Scalar};
use serde_json::json;

const TEN_CLAIM_POLICY_HASH: &str =
    "sha256:cafe6f4767c5e3d162bc66abf2105fc42f106de2f0bf0a77a34f4f00da245688";
const DEMO_POLICY_HASH: &str =
    "sha256:2a5a085efc9a0a85a692a9d1dcb8de6da19ef120cbec4b7aab9161ccca13cfbb";
const DEMO_MANIFEST_HASH: &str =
    "sha256:c107ea3b5fa00596629d3305cc8ff829d0aa458c68b85c46e2677309e07fe186";

#[test]
fn key_sort_and_empty_object() {
    assert_eq!(
        canonicalize(&json!({"b": 1, "a": 2})).unwrap(),
        br#"{"a":2,"b":1}"#
    );
    assert_eq!(canonicalize(&json!({})).unwrap(), b"{}");
}

#[test]
fn unsafe_integer_is_rejected() {
    let err = canonicalize(&json!({"n": 9_007_199_254_740_993u64})).unwrap_err();
    assert!(matches!(err, CanonicalError::NonRepresentableNumber(_)));
}

#[test]
fn ten_claim_policy_matches_frozen_digest() {
    let doc = fixtures::policy_with_claims(10);
    assert_eq!(compute_policy_hash(&doc).unwrap(), TEN_CLAIM_POLICY_HASH);
    assert_eq!(doc.hash, TEN_CLAIM_POLICY_HASH);
}

#[test]
fn demo_policy_and_manifest_match_frozen_digests() {
    assert_eq!(
        compute_policy_hash(&fixtures::demo_policy()).unwrap(),
        DEMO_POLICY_HASH
    );
    let manifest = fixtures::demo_manifest();
    assert_eq!(
        compute_capability_hash(&manifest).unwrap(),
        DEMO_MANIFEST_HASH
    );
    assert_eq!(
        manifest.seal().unwrap().caller_capability_hash,
        DEMO_MANIFEST_HASH
    );
}

#[test]
fn hash_shape() {
    let h = compute_policy_hash(&fixtures::demo_policy()).unwrap();
    assert!(h.starts_with("sha256:"));
    assert!(is_tagged_sha256(&h));
    assert_eq!(h.len(), "sha256:".len() + 64);
}

#[test]
fn stored_hash_never_feeds_the_digest() {
    let mut a = fixtures::demo_policy();
    let mut b = a.clone();
    a.hash = "sha256:0000".into();
    b.hash = "anything at all".into();
    assert_eq!(
        compute_policy_hash(&a).unwrap(),
        compute_policy_hash(&b).unwrap()
    );
}

#[test]
fn temperature_change_changes_capability_hash() {
    let base = fixtures::demo_manifest();
    let warmer = base
        .clone()
        .with_setting("temperature", Scalar::try_from(0.7).unwrap());
    assert_ne!(
        compute_capability_hash(&base).unwrap(),
        compute_capability_hash(&warmer).unwrap()
    );
}

#[test]
fn corrupted_byte_is_a_hash_mismatch() {
    let mut doc = fixtures::policy_with_claims(10);
    doc.claims[4].asset.push('x');
    let recomputed = compute_policy_hash(&doc).unwrap();
    assert_ne!(recomputed, TEN_CLAIM_POLICY_HASH);
    assert!(validate_document(&doc).has(codes::HASH_MISMATCH));
}

#[test]
fn demo_intents_parse_as_described() {
    let doc = fixtures::demo_policy();
    let clean = parse_claims(
        &doc,
        &CallerIntent::new("marketing insights report", &["statistical_analysis"]),
    );
    assert_eq!(clean.len(), 3);
    assert!(clean.iter().all(|p| p.understood && !p.disputed));

    let profiling = parse_claims(
        &doc,
        &CallerIntent::new("profiles", &["behavioural_profiling"]),
    );
    // the collision is forced by the eq constraint: evaluate it directly
    let claim = doc.claim(AGGREGATION_CLAIM).unwrap();
    let forced = evaluate_constraint(
        claim.constraint.as_ref().unwrap(),
        &ActionContext::new().with("purpose", "behavioural_profiling"),
    );
    assert_eq!(forced, ConstraintOutcome::Satisfied);
    let disputed: Vec<_> = profiling
        .iter()
        .filter(|p| p.disputed)
        .map(|p| p.claim_id.as_str())
        .collect();
    assert_eq!(disputed, vec![AGGREGATION_CLAIM]);
}

#[test]
fn constraint_examples() {
    let c = Constraint::eq("purpose", "behavioural_profiling");
    let with = |p: &str| ActionContext::new().with("purpose", p);
    assert_eq!(
        evaluate_constraint(&c, &with("behavioural_profiling")),
        ConstraintOutcome::Satisfied
    );
    assert_eq!(
        evaluate_constraint(&c, &with("statistical_analysis")),
        ConstraintOutcome::Unsatisfied
    );
    assert_eq!(
        evaluate_constraint(&c, &ActionContext::new()),
        ConstraintOutcome::Indeterminate
    );
}

#[test]
fn aggregation_deny_reasoning() {
    let doc = fixtures::demo_policy();
    let claim = doc.claim(AGGREGATION_CLAIM).unwrap();
    let eval = evaluate_claim(
        "analyse_dataset",
        claim,
        &ParsedClaim::accepted(AGGREGATION_CLAIM),
        &ActionContext::new().with("purpose", "behavioural_profiling"),
        &doc.version,
    );
    assert_eq!(eval.decision, AdherenceDecision::Deny);
    assert!(
        eval.reasoning.contains("Policy v2.1.0 §3.4"),
        "{}",
        eval.reasoning
    );
    assert!(eval.reasoning.contains("purpose = behavioural_profiling"));
    assert!(eval.reasoning.ends_with("Denying."));
}

#[test]
fn fixture_diff_matches_set_algebra() {
    let v1 = fixtures::demo_policy();
    let v2 = fixtures::demo_policy_v2();
    let diff = diff_policies(&v1, &v2).unwrap();

    let old: std::collections::BTreeSet<_> = v1.claim_ids().collect();
    let new: std::collections::BTreeSet<_> = v2.claim_ids().collect();
    let removed: Vec<_> = old.difference(&new).copied().collect();
    let added_by_absence: Vec<_> = new.difference(&old).copied().collect();
    assert_eq!(diff.removed, removed);
    assert_eq!(diff.added, added_by_absence);
    let mut retained: Vec<_> = old.intersection(&new).copied().collect();
    retained.sort_by_key(|id| v2.claim_ids().position(|x| x == *id));
    assert_eq!(diff.retained, retained);
    assert_eq!(diff.removed.len(), 1);
    assert_eq!(diff.added.len(), 1);
}

#[test]
fn five_record_chain_and_ten_event_trail() {
    let doc = fixtures::demo_policy();
    let chain = fixtures::consent_chain(5, &doc);
    assert!(validate_consent_chain(&chain, std::slice::from_ref(&doc), None).is_valid());

    let mut gap = chain.clone();
    gap[3].parsed_claims.remove(1);
    let report = validate_consent_chain(&gap, std::slice::from_ref(&doc), None);
    assert!(
        report.has_at(codes::INCOMPLETE_PARSED_CLAIMS, 3),
        "{report}"
    );

    let one = &chain[..1];
    let trail = fixtures::adherence_trail(10, &one[0].id);
    assert!(validate_adherence_trail(&trail, one, None).is_valid());
}

#[test]
fn every_single_transposition_is_detected() {
    let doc = fixtures::demo_policy();
    for len in 2..=7 {
        let chain = fixtures::consent_chain(len, &doc);
        for i in 0..len {
            for j in i + 1..len {
                let mut swapped = chain.clone();
                swapped.swap(i, j);
                let report = validate_consent_chain(&swapped, std::slice::from_ref(&doc), None);
                assert!(
                    report.has_at(codes::BROKEN_LINK, i),
                    "len {len} swap {i},{j}: {report}"
                );
                assert!(
                    report.has_at(codes::BROKEN_LINK, j),
                    "len {len} swap {i},{j}: {report}"
                );
            }
        }
    }
}

#[test]
fn canonical_string_is_utf8_text() {
    let s = canonical_string(&json!({"clause": "§3.4", "z": [1, 2.5, "x"]})).unwrap();
    assert_eq!(s, r#"{"clause":"§3.4","z":[1,2.5,"x"]}"#);
}
