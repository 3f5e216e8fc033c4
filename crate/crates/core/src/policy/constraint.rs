use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::model::{Constraint, Operand, Operator, Scalar, ScalarMap};

/// Result of checking a constraint against an action context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintOutcome {
    Satisfied,
    Unsatisfied,
    /// The context cannot decide the constraint: the key is missing, the
    /// operand types do not fit the operator, or the operator is unknown.
    Indeterminate,
}

impl ConstraintOutcome {
    fn from_bool(b: bool) -> Self {
        if b {
            ConstraintOutcome::Satisfied
        } else {
            ConstraintOutcome::Unsatisfied
        }
    }
}

/// Key/value facts describing one action attempt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionContext {
    pub entries: ScalarMap,
}

impl ActionContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<Scalar>) -> Self {
        self.entries.insert(key.into(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.entries.get(key)
    }

    pub fn is_flag_set(&self, key: &str) -> bool {
        matches!(self.entries.get(key), Some(Scalar::Bool(true)))
    }
}

impl From<ScalarMap> for ActionContext {
    fn from(entries: ScalarMap) -> Self {
        ActionContext { entries }
    }
}

pub fn evaluate_constraint(constraint: &Constraint, ctx: &ActionContext) -> ConstraintOutcome {
    let Some(value) = ctx.get(&constraint.left_operand) else {
        return ConstraintOutcome::Indeterminate;
    };
    compare(value, &constraint.operator, &constraint.right_operand)
}

/// Applies `operator` with `value` on the left.
pub fn compare(value: &Scalar, operator: &Operator, right: &Operand) -> ConstraintOutcome {
    use ConstraintOutcome::*;
    match (operator, right) {
        (Operator::Eq, Operand::Scalar(r)) => ConstraintOutcome::from_bool(value.loosely_equals(r)),
        (Operator::Neq, Operand::Scalar(r)) => {
            ConstraintOutcome::from_bool(!value.loosely_equals(r))
        }
        (Operator::In, Operand::List(items)) => {
            ConstraintOutcome::from_bool(items.iter().any(|r| value.loosely_equals(r)))
        }
        (Operator::NotIn, Operand::List(items)) => {
            ConstraintOutcome::from_bool(!items.iter().any(|r| value.loosely_equals(r)))
        }
        (op, Operand::Scalar(r)) if op.is_ordering() => match value.numeric_cmp(r) {
            None => Indeterminate,
            Some(ord) => ConstraintOutcome::from_bool(match op {
                Operator::Lt => ord == Ordering::Less,
                Operator::Lteq => ord != Ordering::Greater,
                Operator::Gt => ord == Ordering::Greater,
                Operator::Gteq => ord != Ordering::Less,
                _ => unreachable!("guarded by is_ordering"),
            }),
        },
        _ => Indeterminate,
    }
}
