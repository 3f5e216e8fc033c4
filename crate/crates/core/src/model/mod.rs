//! Protocol record types.
//!
//! Field names match the wire format exactly (snake_case). Optional fields
//! serialize as `null` so that every record has one canonical byte form.

mod adherence;
mod capability;
mod consent;
mod policy;
mod scalar;
mod timestamp;

pub use adherence::{AdherenceDecision, AdherenceEvent};
pub use capability::CapabilityManifest;
pub use consent::{
    ChainAnchor, ConsentDecision, ConsentRecord, ParsedClaim, ReconsentTrigger, ValidUntil,
};
pub use policy::{Constraint, Operand, Operator, PolicyClaim, PolicyDocument, RuleType};
pub use scalar::{Scalar, ScalarMap};
pub use timestamp::Timestamp;

/// Fresh UUIDv4 record id.
pub fn new_record_id() -> String {
    uuid::Uuid::new_v4().to_string()
}
