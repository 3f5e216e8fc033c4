use serde::{Deserialize, Serialize};

use super::constraint::{evaluate_constraint, ActionContext, ConstraintOutcome};
use crate::model::{ParsedClaim, PolicyClaim, PolicyDocument, RuleType, ScalarMap};

/// What the caller intends to do with the callee's skills.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallerIntent {
    pub purpose_statement: String,
    #[serde(default)]
    pub declared_purposes: Vec<String>,
    #[serde(default)]
    pub declared_context: ScalarMap,
}

impl CallerIntent {
    pub fn new(statement: impl Into<String>, purposes: &[&str]) -> Self {
        CallerIntent {
            purpose_statement: statement.into(),
            declared_purposes: purposes.iter().map(|p| (*p).to_owned()).collect(),
            declared_context: ScalarMap::new(),
        }
    }
}

/// Turns policy claims into the caller's per-claim verdicts.
///
/// Implementations must return exactly one entry per claim, in document
/// order; they may be model-backed, cached or rule-based.
pub trait ClaimParser: Send + Sync {
    fn parse_claim(&self, claim: &PolicyClaim, intent: &CallerIntent) -> ParsedClaim;

    fn parse_document(&self, doc: &PolicyDocument, intent: &CallerIntent) -> Vec<ParsedClaim> {
        doc.claims
            .iter()
            .map(|c| self.parse_claim(c, intent))
            .collect()
    }
}

/// Deterministic parser over the fixed claim schema.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedParser;

impl ClaimParser for RuleBasedParser {
    fn parse_claim(&self, claim: &PolicyClaim, intent: &CallerIntent) -> ParsedClaim {
        parse_claim(claim, intent)
    }
}

pub fn parse_claims(doc: &PolicyDocument, intent: &CallerIntent) -> Vec<ParsedClaim> {
    RuleBasedParser.parse_document(doc, intent)
}

/// A claim is understood unless its constraint is malformed or uses an
/// unknown operator. It is disputed when it is a prohibition whose
/// constraint the caller's declared intent would satisfy.
pub fn parse_claim(claim: &PolicyClaim, intent: &CallerIntent) -> ParsedClaim {
    let mut parsed = ParsedClaim::accepted(&claim.id);
    let Some(constraint) = &claim.constraint else {
        return parsed;
    };
    if constraint.shape_error().is_some() {
        parsed.understood = false;
        return parsed;
    }
    if claim.rule_type != RuleType::Prohibition {
        return parsed;
    }

    let base = ActionContext::from(intent.declared_context.clone());
    if constraint.left_operand == "purpose" {
        for purpose in &intent.declared_purposes {
            let ctx = base.clone().with("purpose", purpose.as_str());
            if evaluate_constraint(constraint, &ctx) == ConstraintOutcome::Satisfied {
                parsed.disputed = true;
                parsed.dispute_reason = Some(format!(
                    "declared purpose '{purpose}' is prohibited by {} ({}): {constraint}",
                    claim.clause_ref, claim.id
                ));
                return parsed;
            }
        }
    } else if evaluate_constraint(constraint, &base) == ConstraintOutcome::Satisfied {
        let value = &intent.declared_context[&constraint.left_operand];
        parsed.disputed = true;
        parsed.dispute_reason = Some(format!(
            "declared {} = {value} is prohibited by {} ({}): {constraint}",
            constraint.left_operand, claim.clause_ref, claim.id
        ));
    }
    parsed
}
