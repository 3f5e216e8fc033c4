use std::fmt;

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::timestamp::Timestamp;

/// The kind of rule a claim expresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleType {
    Permission,
    Prohibition,
    Obligation,
}

impl fmt::Display for RuleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleType::Permission => "permission",
            RuleType::Prohibition => "prohibition",
            RuleType::Obligation => "obligation",
        })
    }
}

/// Constraint operator. Operators outside the supported set are kept
/// verbatim so a caller can report the claim as not understood instead of
/// failing to read the whole document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Operator {
    Eq,
    Neq,
    In,
    NotIn,
    Lt,
    Lteq,
    Gt,
    Gteq,
    Unsupported(String),
}

impl Operator {
    pub fn as_str(&self) -> &str {
        match self {
            Operator::Eq => "eq",
            Operator::Neq => "neq",
            Operator::In => "in",
            Operator::NotIn => "not_in",
            Operator::Lt => "lt",
            Operator::Lteq => "lteq",
            Operator::Gt => "gt",
            Operator::Gteq => "gteq",
            Operator::Unsupported(s) => s,
        }
    }

    pub fn is_supported(&self) -> bool {
        !matches!(self, Operator::Unsupported(_))
    }

    pub fn is_ordering(&self) -> bool {
        matches!(
            self,
            Operator::Lt | Operator::Lteq | Operator::Gt | Operator::Gteq
        )
    }

    pub fn is_membership(&self) -> bool {
        matches!(self, Operator::In | Operator::NotIn)
    }

    /// Symbol used when rendering reasoning text.
    pub fn symbol(&self) -> &str {
        match self {
            Operator::Eq => "=",
            Operator::Neq => "!=",
            Operator::In => "in",
            Operator::NotIn => "not in",
            Operator::Lt => "<",
            Operator::Lteq => "<=",
            Operator::Gt => ">",
            Operator::Gteq => ">=",
            Operator::Unsupported(s) => s,
        }
    }
}

impl From<String> for Operator {
    fn from(s: String) -> Self {
        match s.as_str() {
            "eq" => Operator::Eq,
            "neq" => Operator::Neq,
            "in" => Operator::In,
            "not_in" => Operator::NotIn,
            "lt" => Operator::Lt,
            "lteq" => Operator::Lteq,
            "gt" => Operator::Gt,
            "gteq" => Operator::Gteq,
            _ => Operator::Unsupported(s),
        }
    }
}

impl From<Operator> for String {
    fn from(op: Operator) -> String {
        op.as_str().to_owned()
    }
}

/// Right-hand side of a constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Scalar(s) => write!(f, "{s}"),
            Operand::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// `left_operand operator right_operand`, e.g. `purpose eq "behavioural_profiling"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub left_operand: String,
    pub operator: Operator,
    pub right_operand: Operand,
}

impl Constraint {
    pub fn new(left: impl Into<String>, operator: Operator, right: Operand) -> Self {
        Constraint {
            left_operand: left.into(),
            operator,
            right_operand: right,
        }
    }

    pub fn eq(left: impl Into<String>, right: impl Into<Scalar>) -> Self {
        Self::new(left, Operator::Eq, Operand::Scalar(right.into()))
    }

    /// Describes a shape error, if the operand does not fit the operator.
    pub fn shape_error(&self) -> Option<String> {
        if self.left_operand.is_empty() {
            return Some("empty left_operand".into());
        }
        match (&self.operator, &self.right_operand) {
            (Operator::Unsupported(op), _) => Some(format!("unsupported operator '{op}'")),
            (op, Operand::Scalar(_)) if op.is_membership() => Some(format!(
                "operator '{}' requires a list operand",
                op.as_str()
            )),
            (op, Operand::List(_)) if !op.is_membership() => Some(format!(
                "operator '{}' requires a scalar operand",
                op.as_str()
            )),
            (op, Operand::Scalar(s)) if op.is_ordering() && s.as_f64().is_none() => Some(format!(
                "operator '{}' requires a numeric operand",
                op.as_str()
            )),
            _ => None,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.left_operand,
            self.operator.symbol(),
            self.right_operand
        )
    }
}

/// One clause of a usage policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyClaim {
    /// Stable across versions; a claim that changes meaning gets a new id.
    pub id: String,
    /// Section of the human-readable document, e.g. "§3.4".
    pub clause_ref: String,
    pub action: String,
    pub asset: String,
    pub rule_type: RuleType,
    #[serde(default)]
    pub constraint: Option<Constraint>,
    pub since_version: String,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub dimension: Option<String>,
}

/// The callee's versioned, content-addressed usage policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub version: String,
    /// `"sha256:"` + 64 lowercase hex digits over the document with this
    /// field blanked.
    #[serde(default)]
    pub hash: String,
    pub effective_date: Timestamp,
    #[serde(default)]
    pub supersedes: Option<String>,
    /// Order is significant.
    pub claims: Vec<PolicyClaim>,
    pub publisher: String,
    pub natural_language_uri: String,
}

impl PolicyDocument {
    pub fn claim(&self, id: &str) -> Option<&PolicyClaim> {
        self.claims.iter().find(|c| c.id == id)
    }

    pub fn claim_ids(&self) -> impl Iterator<Item = &str> {
        self.claims.iter().map(|c| c.id.as_str())
    }

    /// Recomputes and stores the content hash.
    pub fn seal(mut self) -> Result<Self, crate::canonical::CanonicalError> {
        self.hash = crate::hash::compute_policy_hash(&self)?;
        Ok(self)
    }

    pub fn semver(&self) -> Result<semver::Version, semver::Error> {
        semver::Version::parse(&self.version)
    }
}
