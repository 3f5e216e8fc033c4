//! Deterministic sample documents and generators shared by tests, the
//! benchmark harness and the demo.

use chrono::{Duration, TimeZone, Utc};

use crate::model::{
    AdherenceDecision, AdherenceEvent, CapabilityManifest, ConsentDecision, ConsentRecord,
    Constraint, Operand, Operator, ParsedClaim, PolicyClaim, PolicyDocument, ReconsentTrigger,
    RuleType, Scalar, ScalarMap, Timestamp, ValidUntil,
};

pub const DEMO_CALLEE: &str = "https://callee.example.com";
pub const DEMO_CALLER: &str = "https://caller.example.com/agents/marketing-insights";
pub const RETENTION_CLAIM: &str = "claim-data-retention";
pub const AGGREGATION_CLAIM: &str = "claim-aggregation-prohibition";
pub const DISTRIBUTION_CLAIM: &str = "claim-third-party-distribution";
pub const DEMO_SKILL: &str = "analyse_dataset";
pub const SHARE_SKILL: &str = "share_report";

/// Deterministic UUID-shaped id.
pub fn fixed_id(n: u64) -> String {
    format!("00000000-0000-4000-8000-{n:012}")
}

fn fixed_time(offset_secs: i64) -> Timestamp {
    let base = Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap();
    Timestamp::from(base + Duration::seconds(offset_secs))
}

/// The three-prohibition demo policy (v2.1.0), sealed.
pub fn demo_policy() -> PolicyDocument {
    PolicyDocument {
        version: "2.1.0".into(),
        hash: String::new(),
        effective_date: Timestamp::new("2026-02-27T00:00:00Z"),
        supersedes: Some("2.0.0".into()),
        claims: vec![
            PolicyClaim {
                id: RETENTION_CLAIM.into(),
                clause_ref: "§2.1".into(),
                action: "odrl:retain".into(),
                asset: "pii:session_data".into(),
                rule_type: RuleType::Prohibition,
                constraint: Some(Constraint::new(
                    "retention_days",
                    Operator::Gt,
                    Operand::Scalar(30.into()),
                )),
                since_version: "1.0.0".into(),
                category: Some("pii".into()),
                dimension: Some("retention".into()),
            },
            PolicyClaim {
                id: AGGREGATION_CLAIM.into(),
                clause_ref: "§3.4".into(),
                action: "odrl:aggregate".into(),
                asset: "pii:session_data".into(),
                rule_type: RuleType::Prohibition,
                constraint: Some(Constraint::eq("purpose", "behavioural_profiling")),
                since_version: "2.0.0".into(),
                category: Some("pii".into()),
                dimension: Some("aggregation".into()),
            },
            PolicyClaim {
                id: DISTRIBUTION_CLAIM.into(),
                clause_ref: "§4.2".into(),
                action: "odrl:distribute".into(),
                asset: "output:analysis_results".into(),
                rule_type: RuleType::Prohibition,
                constraint: Some(Constraint::eq("recipient", "third_party")),
                since_version: "1.0.0".into(),
                category: None,
                dimension: Some("distribution".into()),
            },
        ],
        publisher: DEMO_CALLEE.into(),
        natural_language_uri: format!("{DEMO_CALLEE}/terms"),
    }
    .seal()
    .expect("fixture canonicalizes")
}

/// Successor of [`demo_policy`]: retires the distribution claim and adds a
/// notification obligation.
pub fn demo_policy_v2() -> PolicyDocument {
    let mut doc = demo_policy();
    doc.version = "2.2.0".into();
    doc.supersedes = Some("2.1.0".into());
    doc.effective_date = Timestamp::new("2026-04-01T00:00:00Z");
    doc.claims.retain(|c| c.id != DISTRIBUTION_CLAIM);
    doc.claims.push(PolicyClaim {
        id: "claim-principal-notification".into(),
        clause_ref: "§5.1".into(),
        action: "odrl:inform".into(),
        asset: "principal:notification".into(),
        rule_type: RuleType::Obligation,
        constraint: None,
        since_version: "2.2.0".into(),
        category: None,
        dimension: Some("notification".into()),
    });
    doc.seal().expect("fixture canonicalizes")
}

pub fn demo_manifest() -> CapabilityManifest {
    CapabilityManifest::new(
        "example-llm-2025-06",
        vec!["sql_query".into(), "chart_render".into()],
    )
    .with_setting(
        "system_prompt_digest",
        "sha256:5d41402abc4b2a76b9719d911017c592ae5b3f4b1c2e1c6e0c9a1a2b3c4d5e6f",
    )
    .with_setting("temperature", Scalar::try_from(0.2).unwrap())
    .with_setting("retrieval_augmented", false)
    .with_setting("chain_of_thought", true)
}

/// Accepted record over `doc` with every claim understood and undisputed.
pub fn demo_consent_record(doc: &PolicyDocument) -> ConsentRecord {
    ConsentRecord {
        id: fixed_id(1),
        prev_id: None,
        caller: DEMO_CALLER.into(),
        callee: doc.publisher.clone(),
        policy_version: doc.version.clone(),
        policy_hash: doc.hash.clone(),
        parsed_claims: doc
            .claims
            .iter()
            .map(|c| ParsedClaim::accepted(&c.id))
            .collect(),
        decision: ConsentDecision::Accepted,
        timestamp: fixed_time(0),
        valid_until: ValidUntil::OnAnyChange,
        signature: String::new(),
        caller_capability_hash: crate::hash::compute_capability_hash(&demo_manifest())
            .expect("fixture canonicalizes"),
        reconsent_trigger: None,
        chain_anchor: None,
    }
}

pub fn demo_event(consent_record_id: &str, prev_id: Option<String>) -> AdherenceEvent {
    let mut context = ScalarMap::new();
    context.insert("purpose".into(), "statistical_analysis".into());
    context.insert("retention_days".into(), 0.into());
    AdherenceEvent {
        id: fixed_id(1000),
        prev_id,
        consent_record_id: consent_record_id.into(),
        action: DEMO_SKILL.into(),
        claim_id: AGGREGATION_CLAIM.into(),
        clause_ref: "§3.4".into(),
        decision: AdherenceDecision::Permit,
        reasoning: "Action 'analyse_dataset' maps to odrl:aggregate on pii:session_data. \
                    Policy v2.1.0 §3.4 (claim-aggregation-prohibition) prohibits this where \
                    purpose = behavioural_profiling; context has purpose = statistical_analysis, \
                    which the prohibition permits. Permitting."
            .into(),
        timestamp: fixed_time(60),
        context,
        signature: String::new(),
    }
}

/// A sealed policy with `n` claims cycling through every rule type and
/// operator shape.
pub fn policy_with_claims(n: usize) -> PolicyDocument {
    let claims = (0..n)
        .map(|i| {
            let (rule_type, constraint) = match i % 4 {
                0 => (
                    RuleType::Prohibition,
                    Some(Constraint::eq("purpose", format!("purpose_{i}").as_str())),
                ),
                1 => (
                    RuleType::Permission,
                    Some(Constraint::new(
                        "region",
                        Operator::In,
                        Operand::List(vec!["eu".into(), "us".into()]),
                    )),
                ),
                2 => (
                    RuleType::Prohibition,
                    Some(Constraint::new(
                        "retention_days",
                        Operator::Gt,
                        Operand::Scalar((i as i64).into()),
                    )),
                ),
                _ => (RuleType::Obligation, None),
            };
            PolicyClaim {
                id: format!("claim-{i:04}"),
                clause_ref: format!("§{}.{}", i / 10 + 1, i % 10 + 1),
                action: format!("odrl:action_{}", i % 7),
                asset: format!("asset:dataset_{}", i % 5),
                rule_type,
                constraint,
                since_version: "1.0.0".into(),
                category: (i % 3 == 0).then(|| "pii".to_owned()),
                dimension: Some(format!("dimension_{}", i % 4)),
            }
        })
        .collect();
    PolicyDocument {
        version: "1.0.0".into(),
        hash: String::new(),
        effective_date: Timestamp::new("2026-01-01T00:00:00Z"),
        supersedes: None,
        claims,
        publisher: DEMO_CALLEE.into(),
        natural_language_uri: format!("{DEMO_CALLEE}/terms"),
    }
    .seal()
    .expect("fixture canonicalizes")
}

/// A linked chain of `len` accepted records over `doc`. Records after the
/// first carry a capability-change trigger.
pub fn consent_chain(len: usize, doc: &PolicyDocument) -> Vec<ConsentRecord> {
    let base = demo_consent_record(doc);
    let mut records: Vec<ConsentRecord> = Vec::with_capacity(len);
    for i in 0..len {
        let prev_id = records.last().map(|r| r.id.clone());
        records.push(ConsentRecord {
            id: fixed_id(i as u64 + 1),
            reconsent_trigger: prev_id.as_ref().map(|_| ReconsentTrigger::CapabilityChange),
            prev_id,
            timestamp: fixed_time(i as i64 * 3600),
            caller_capability_hash: crate::hash::tagged_sha256(
                format!("capability-{i}").as_bytes(),
            ),
            ..base.clone()
        });
    }
    records
}

/// A linked trail of `len` events anchored to `consent_record_id`.
pub fn adherence_trail(len: usize, consent_record_id: &str) -> Vec<AdherenceEvent> {
    let base = demo_event(consent_record_id, None);
    let mut events: Vec<AdherenceEvent> = Vec::with_capacity(len);
    for i in 0..len {
        let prev_id = events.last().map(|e| e.id.clone());
        events.push(AdherenceEvent {
            id: fixed_id(10_000 + i as u64),
            prev_id,
            timestamp: fixed_time(60 + i as i64),
            decision: if i % 5 == 4 {
                AdherenceDecision::Deny
            } else {
                AdherenceDecision::Permit
            },
            ..base.clone()
        });
    }
    events
}
