//! Per-action claim evaluation.
//!
//! Reasoning strings follow one fixed template so audit output stays stable
//! across releases:
//!
//! ```text
//! Action '<action>' maps to <claim.action> on <claim.asset>. Policy v<version> <clause_ref> (<claim_id>) <finding>. <Verdict>.
//! ```
//!
//! where `<Verdict>` is `Permitting`, `Denying` or `Escalating` and
//! `<finding>` is one of
//!
//! | case                               | finding                                                                        |
//! |------------------------------------|--------------------------------------------------------------------------------|
//! | disputed                           | `is disputed by the caller: <dispute_reason>`                                  |
//! | not understood                     | `was not understood by the caller`                                             |
//! | prohibition, no constraint         | `prohibits this unconditionally`                                               |
//! | prohibition, satisfied             | `prohibits this where <c>; context has <k> = <v>`                              |
//! | prohibition, unsatisfied           | `prohibits this where <c>; context has <k> = <v>, which the prohibition permits` |
//! | permission, no constraint          | `permits this unconditionally`                                                 |
//! | permission, satisfied              | `permits this where <c>; context has <k> = <v>`                                |
//! | permission, unsatisfied            | `permits this only where <c>; context has <k> = <v>`                           |
//! | either, indeterminate              | `<prohibits\|permits> this where <c>; context does not determine <k>`          |
//! | obligation, fulfilled              | `requires <claim.action> on <claim.asset>; obligation_fulfilled:<id> is set`   |
//! | obligation, not fulfilled          | `requires <claim.action> on <claim.asset>; obligation_fulfilled:<id> is not confirmed` |

use serde::{Deserialize, Serialize};

use super::constraint::{evaluate_constraint, ActionContext, ConstraintOutcome};
use crate::model::{AdherenceDecision, ParsedClaim, PolicyClaim, RuleType};

/// Prefix of the context flag that discharges an obligation claim.
pub const OBLIGATION_FLAG_PREFIX: &str = "obligation_fulfilled:";

pub fn obligation_flag(claim_id: &str) -> String {
    format!("{OBLIGATION_FLAG_PREFIX}{claim_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimEvaluation {
    pub claim_id: String,
    pub clause_ref: String,
    pub decision: AdherenceDecision,
    pub reasoning: String,
}

pub fn evaluate_claim(
    action: &str,
    claim: &PolicyClaim,
    parsed: &ParsedClaim,
    ctx: &ActionContext,
    policy_version: &str,
) -> ClaimEvaluation {
    use AdherenceDecision::*;
    debug_assert_eq!(parsed.claim_id, claim.id);

    let (decision, finding) = if parsed.disputed {
        let reason = parsed
            .dispute_reason
            .as_deref()
            .unwrap_or("no reason given");
        (Deny, format!("is disputed by the caller: {reason}"))
    } else if !parsed.understood {
        (Deny, "was not understood by the caller".to_owned())
    } else {
        match claim.rule_type {
            RuleType::Obligation => {
                let flag = obligation_flag(&claim.id);
                if ctx.is_flag_set(&flag) {
                    (
                        Permit,
                        format!(
                            "requires {} on {}; {flag} is set",
                            claim.action, claim.asset
                        ),
                    )
                } else {
                    (
                        Escalate,
                        format!(
                            "requires {} on {}; {flag} is not confirmed",
                            claim.action, claim.asset
                        ),
                    )
                }
            }
            rule @ (RuleType::Prohibition | RuleType::Permission) => {
                constrained_rule(rule, claim, ctx)
            }
        }
    };

    let verdict = match decision {
        Permit => "Permitting",
        Deny => "Denying",
        Escalate => "Escalating",
    };
    ClaimEvaluation {
        claim_id: claim.id.clone(),
        clause_ref: claim.clause_ref.clone(),
        decision,
        reasoning: format!(
            "Action '{action}' maps to {} on {}. Policy v{policy_version} {} ({}) {finding}. {verdict}.",
            claim.action, claim.asset, claim.clause_ref, claim.id
        ),
    }
}

fn constrained_rule(
    rule: RuleType,
    claim: &PolicyClaim,
    ctx: &ActionContext,
) -> (AdherenceDecision, String) {
    use AdherenceDecision::*;
    let prohibition = rule == RuleType::Prohibition;
    let verb = if prohibition { "prohibits" } else { "permits" };
    let Some(constraint) = &claim.constraint else {
        let decision = if prohibition { Deny } else { Permit };
        return (decision, format!("{verb} this unconditionally"));
    };
    let key = &constraint.left_operand;
    let observed = || {
        ctx.get(key)
            .map(|v| format!("context has {key} = {v}"))
            .unwrap_or_default()
    };
    match (evaluate_constraint(constraint, ctx), prohibition) {
        (ConstraintOutcome::Indeterminate, _) => (
            Escalate,
            format!("{verb} this where {constraint}; context does not determine {key}"),
        ),
        (ConstraintOutcome::Satisfied, true) => (
            Deny,
            format!("prohibits this where {constraint}; {}", observed()),
        ),
        (ConstraintOutcome::Unsatisfied, true) => (
            Permit,
            format!(
                "prohibits this where {constraint}; {}, which the prohibition permits",
                observed()
            ),
        ),
        (ConstraintOutcome::Satisfied, false) => (
            Permit,
            format!("permits this where {constraint}; {}", observed()),
        ),
        (ConstraintOutcome::Unsatisfied, false) => (
            Deny,
            format!("permits this only where {constraint}; {}", observed()),
        ),
    }
}

/// Aggregate outcome of evaluating every claim that governs one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEvaluation {
    pub action: String,
    pub decision: AdherenceDecision,
    /// One entry per governing claim, in the order given.
    pub evaluations: Vec<ClaimEvaluation>,
}

impl ActionEvaluation {
    /// The first evaluation whose decision equals the aggregate.
    pub fn decisive(&self) -> &ClaimEvaluation {
        self.evaluations
            .iter()
            .find(|e| e.decision == self.decision)
            .expect("aggregate decision comes from some evaluation")
    }

    /// Reasoning for a single adherence event covering the whole action:
    /// the decisive claim's reasoning followed by the other claims' verdicts.
    pub fn event_reasoning(&self) -> String {
        let decisive = self.decisive();
        let others: Vec<String> = self
            .evaluations
            .iter()
            .filter(|e| e.claim_id != decisive.claim_id)
            .map(|e| format!("{} {} -> {}", e.claim_id, e.clause_ref, e.decision))
            .collect();
        if others.is_empty() {
            decisive.reasoning.clone()
        } else {
            format!(
                "{} Also evaluated: {}.",
                decisive.reasoning,
                others.join("; ")
            )
        }
    }
}

/// Evaluates every governing claim and aggregates with precedence
/// deny > escalate > permit. An action with no governing claims is permitted.
pub fn evaluate_action(
    action: &str,
    governing_claims: &[(&PolicyClaim, &ParsedClaim)],
    ctx: &ActionContext,
    policy_version: &str,
) -> ActionEvaluation {
    if governing_claims.is_empty() {
        return ActionEvaluation {
            action: action.to_owned(),
            decision: AdherenceDecision::Permit,
            evaluations: vec![ClaimEvaluation {
                claim_id: String::new(),
                clause_ref: String::new(),
                decision: AdherenceDecision::Permit,
                reasoning: format!(
                    "Action '{action}' is not governed by any claim of policy v{policy_version}. Permitting."
                ),
            }],
        };
    }
    let evaluations: Vec<ClaimEvaluation> = governing_claims
        .iter()
        .map(|(claim, parsed)| evaluate_claim(action, claim, parsed, ctx, policy_version))
        .collect();
    let decision = evaluations
        .iter()
        .map(|e| e.decision)
        .max_by_key(|d| d.severity())
        .unwrap_or(AdherenceDecision::Permit);
    ActionEvaluation {
        action: action.to_owned(),
        decision,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, AGGREGATION_CLAIM, DEMO_SKILL, RETENTION_CLAIM};
    use crate::model::{Constraint, PolicyDocument};
    use AdherenceDecision::*;

    fn claim<'a>(doc: &'a PolicyDocument, id: &str) -> &'a PolicyClaim {
        doc.claim(id).unwrap()
    }

    #[test]
    fn profiling_purpose_is_denied_with_citation() {
        let doc = fixtures::demo_policy();
        let ctx = ActionContext::new().with("purpose", "behavioural_profiling");
        let eval = evaluate_claim(
            "aggregate_sessions",
            claim(&doc, AGGREGATION_CLAIM),
            &ParsedClaim::accepted(AGGREGATION_CLAIM),
            &ctx,
            &doc.version,
        );
        assert_eq!(eval.decision, Deny);
        assert_eq!(
            eval.reasoning,
            "Action 'aggregate_sessions' maps to odrl:aggregate on pii:session_data. \
             Policy v2.1.0 §3.4 (claim-aggregation-prohibition) prohibits this where \
             purpose = behavioural_profiling; context has purpose = behavioural_profiling. Denying."
        );
    }

    #[test]
    fn statistical_purpose_is_permitted() {
        let doc = fixtures::demo_policy();
        let ctx = ActionContext::new().with("purpose", "statistical_analysis");
        let eval = evaluate_claim(
            DEMO_SKILL,
            claim(&doc, AGGREGATION_CLAIM),
            &ParsedClaim::accepted(AGGREGATION_CLAIM),
            &ctx,
            &doc.version,
        );
        assert_eq!(eval.decision, Permit);
        assert!(eval
            .reasoning
            .ends_with("which the prohibition permits. Permitting."));
    }

    #[test]
    fn disputed_claim_is_denied_regardless_of_context() {
        let doc = fixtures::demo_policy();
        let parsed = ParsedClaim::disputed(AGGREGATION_CLAIM, "we profile");
        for ctx in [
            ActionContext::new(),
            ActionContext::new().with("purpose", "statistical_analysis"),
        ] {
            let eval = evaluate_claim(
                DEMO_SKILL,
                claim(&doc, AGGREGATION_CLAIM),
                &parsed,
                &ctx,
                "2.1.0",
            );
            assert_eq!(eval.decision, Deny);
        }
    }

    #[test]
    fn decision_table() {
        let doc = fixtures::demo_policy();
        let base = claim(&doc, AGGREGATION_CLAIM).clone();
        let ok = ParsedClaim::accepted(AGGREGATION_CLAIM);
        let hit = ActionContext::new().with("purpose", "behavioural_profiling");
        let miss = ActionContext::new().with("purpose", "other");
        let none = ActionContext::new();
        let run = |c: &PolicyClaim, ctx: &ActionContext| {
            evaluate_claim("a", c, &ok, ctx, "1.0.0").decision
        };

        assert_eq!(run(&base, &hit), Deny);
        assert_eq!(run(&base, &miss), Permit);
        assert_eq!(run(&base, &none), Escalate);

        let permission = PolicyClaim {
            rule_type: RuleType::Permission,
            ..base.clone()
        };
        assert_eq!(run(&permission, &hit), Permit);
        assert_eq!(run(&permission, &miss), Deny);
        assert_eq!(run(&permission, &none), Escalate);
        let open = PolicyClaim {
            constraint: None,
            ..permission
        };
        assert_eq!(run(&open, &none), Permit);

        let unconditional = PolicyClaim {
            constraint: None,
            ..base.clone()
        };
        assert_eq!(run(&unconditional, &miss), Deny);

        let obligation = PolicyClaim {
            rule_type: RuleType::Obligation,
            constraint: None,
            ..base
        };
        assert_eq!(run(&obligation, &none), Escalate);
        let fulfilled = ActionContext::new().with(obligation_flag(AGGREGATION_CLAIM), true);
        assert_eq!(run(&obligation, &fulfilled), Permit);
        let wrong_flag_type = ActionContext::new().with(obligation_flag(AGGREGATION_CLAIM), "yes");
        assert_eq!(run(&obligation, &wrong_flag_type), Escalate);
    }

    #[test]
    fn not_understood_never_permits() {
        let doc = fixtures::demo_policy();
        let parsed = ParsedClaim {
            understood: false,
            ..ParsedClaim::accepted(RETENTION_CLAIM)
        };
        let ctx = ActionContext::new().with("retention_days", 0);
        let eval = evaluate_claim(
            DEMO_SKILL,
            claim(&doc, RETENTION_CLAIM),
            &parsed,
            &ctx,
            "2.1.0",
        );
        assert_eq!(eval.decision, Deny);
        assert!(eval.reasoning.contains("not understood"));
    }

    #[test]
    fn aggregate_precedence() {
        let doc = fixtures::demo_policy();
        let base = claim(&doc, AGGREGATION_CLAIM).clone();
        let permits = PolicyClaim {
            id: "p".into(),
            ..base.clone()
        };
        let denies = PolicyClaim {
            id: "d".into(),
            constraint: None,
            ..base.clone()
        };
        let escalates = PolicyClaim {
            id: "e".into(),
            rule_type: RuleType::Obligation,
            constraint: None,
            ..base
        };
        let parsed: Vec<ParsedClaim> = ["p", "d", "e"]
            .iter()
            .map(|id| ParsedClaim::accepted(*id))
            .collect();
        let ctx = ActionContext::new().with("purpose", "statistical_analysis");
        let run = |claims: &[(&PolicyClaim, &ParsedClaim)]| {
            evaluate_action("a", claims, &ctx, "1.0.0").decision
        };

        assert_eq!(
            run(&[
                (&permits, &parsed[0]),
                (&denies, &parsed[1]),
                (&permits, &parsed[0])
            ]),
            Deny
        );
        assert_eq!(
            run(&[(&permits, &parsed[0]), (&permits, &parsed[0])]),
            Permit
        );
        assert_eq!(
            run(&[(&permits, &parsed[0]), (&escalates, &parsed[2])]),
            Escalate
        );
        assert_eq!(
            run(&[(&escalates, &parsed[2]), (&denies, &parsed[1])]),
            Deny
        );
    }

    #[test]
    fn action_evaluation_over_demo_skill() {
        let doc = fixtures::demo_policy();
        let parsed: Vec<ParsedClaim> = doc
            .claims
            .iter()
            .map(|c| ParsedClaim::accepted(&c.id))
            .collect();
        let governing = vec![
            (claim(&doc, RETENTION_CLAIM), &parsed[0]),
            (claim(&doc, AGGREGATION_CLAIM), &parsed[1]),
        ];
        let deny_ctx = ActionContext::new()
            .with("purpose", "behavioural_profiling")
            .with("retention_days", 0);
        let eval = evaluate_action(DEMO_SKILL, &governing, &deny_ctx, &doc.version);
        assert_eq!(eval.decision, Deny);
        assert_eq!(eval.evaluations.len(), 2);
        assert_eq!(eval.decisive().claim_id, AGGREGATION_CLAIM);
        assert!(eval
            .event_reasoning()
            .contains("Also evaluated: claim-data-retention §2.1 -> permit"));

        let ok_ctx = ActionContext::new()
            .with("purpose", "statistical_analysis")
            .with("retention_days", 0);
        let eval = evaluate_action(DEMO_SKILL, &governing, &ok_ctx, &doc.version);
        assert_eq!(eval.decision, Permit);
        assert_eq!(eval.decisive().claim_id, RETENTION_CLAIM);

        let partial = ActionContext::new().with("purpose", "statistical_analysis");
        assert_eq!(
            evaluate_action(DEMO_SKILL, &governing, &partial, &doc.version).decision,
            Escalate
        );
    }

    #[test]
    fn ungoverned_action_is_permitted() {
        let eval = evaluate_action("ping", &[], &ActionContext::new(), "1.0.0");
        assert_eq!(eval.decision, Permit);
        assert!(!eval.decisive().reasoning.is_empty());
    }

    #[test]
    fn reasoning_is_never_empty() {
        let c = PolicyClaim {
            constraint: Some(Constraint::eq("k", "v")),
            ..fixtures::demo_policy().claims[0].clone()
        };
        for ctx in [ActionContext::new(), ActionContext::new().with("k", "v")] {
            let e = evaluate_claim("a", &c, &ParsedClaim::accepted(&c.id), &ctx, "1.0.0");
            assert!(!e.reasoning.is_empty());
            assert!(e.reasoning.contains(&c.id) && e.reasoning.contains(&c.clause_ref));
        }
    }
}
