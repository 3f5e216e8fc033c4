//! The two-agent demo: a data-analysis callee with the three-prohibition
//! policy and a marketing-insights caller.

use std::sync::Arc;

use serde_json::json;

use acap_core::fixtures::{
    self, AGGREGATION_CLAIM, DEMO_CALLEE, DEMO_CALLER, DEMO_SKILL, DISTRIBUTION_CLAIM,
    RETENTION_CLAIM, SHARE_SKILL,
};
use acap_core::{CallerIntent, Scalar};

use crate::callee::{CalleeBuilder, CalleeService, SkillHandler};
use crate::caller::CallerConfig;
use crate::card::{AdherenceMode, SkillDescriptor};

pub const DEMO_PRINCIPAL: &str = "did:example:org:marketing";
pub const DEMO_INTENT: &str =
    "marketing insights report without behavioural profiling of individual customers";

/// Handler answering with its own name and the context it ran under.
pub fn echo_handler(name: &str) -> SkillHandler {
    let name = name.to_owned();
    Arc::new(move |ctx| json!({ "skill": name, "context": ctx }))
}

fn analyse_dataset() -> SkillHandler {
    Arc::new(|ctx| {
        let purpose = ctx
            .get("purpose")
            .and_then(Scalar::as_str)
            .unwrap_or("unspecified");
        json!({
            "purpose": purpose,
            "summary": "Session volume peaks mid-week; repeat visits cluster around \
                        promotional periods; no individual-level profiles were built.",
        })
    })
}

pub fn demo_skills() -> Vec<SkillDescriptor> {
    vec![
        SkillDescriptor {
            name: DEMO_SKILL.into(),
            description: Some("One-shot qualitative analysis of a session dataset".into()),
            policy_claims: vec![RETENTION_CLAIM.into(), AGGREGATION_CLAIM.into()],
        },
        SkillDescriptor {
            name: SHARE_SKILL.into(),
            description: Some("Send an analysis report to a named recipient".into()),
            policy_claims: vec![DISTRIBUTION_CLAIM.into()],
        },
    ]
}

/// Builder for the demo callee with both skills registered; the policy is
/// not yet published.
pub fn demo_builder(base_url: &str) -> CalleeBuilder {
    let [analyse, share]: [SkillDescriptor; 2] = demo_skills().try_into().expect("two skills");
    CalleeService::builder(DEMO_CALLEE, base_url)
        .name("data-analysis")
        .skill(analyse, analyse_dataset())
        .skill(share, echo_handler(SHARE_SKILL))
}

/// The demo callee serving the demo policy.
pub fn demo_service(base_url: &str, mode: AdherenceMode) -> CalleeService {
    let service = demo_builder(base_url).adherence_mode(mode).build();
    service
        .publish(fixtures::demo_policy())
        .expect("demo policy publishes");
    service
}

/// The demo caller: statistical analysis, no profiling.
pub fn demo_caller_config() -> CallerConfig {
    CallerConfig::new(
        DEMO_CALLER,
        DEMO_PRINCIPAL,
        fixtures::demo_manifest(),
        CallerIntent::new(DEMO_INTENT, &["statistical_analysis"]),
    )
}
