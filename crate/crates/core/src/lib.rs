//! Core types and algorithms for agent consent and adherence.
//!
//! * [`model`]: policy documents, consent records, adherence events and
//!   capability manifests.
//! * [`canonical`] and [`hash`]: canonical JSON and content addressing.
//! * [`signing`]: detached ES256 signatures over canonical records.
//! * [`policy`]: claim parsing, constraint evaluation, adherence reasoning
//!   and version diffs.
//! * [`chain`]: append-only consent chains, adherence trails, their
//!   validators and a shared store.
//! * [`lifecycle`]: the consent lifecycle model and its bounded explorer.

pub mod canonical;
pub mod chain;
pub mod fixtures;
pub mod hash;
pub mod lifecycle;
pub mod model;
pub mod policy;
pub mod report;
pub mod signing;
pub mod validate;

pub use canonical::{canonicalize, canonicalize_serializable, CanonicalError};
pub use chain::{
    active_consent, blocked_claims, consent_status, export_audit, validate_adherence_trail,
    validate_consent_chain, AdherenceTrail, AuditDocument, ChainError, ChainStore, ConsentChain,
    ConsentStatus, StaleReason,
};
pub use hash::{compute_capability_hash, compute_policy_hash};
pub use model::*;
pub use policy::{
    diff_policies, evaluate_action, evaluate_claim, evaluate_constraint, parse_claims,
    ActionContext, CallerIntent, PolicyDiff,
};
pub use report::{ValidationReport, Violation};
pub use signing::{sign_in_place, verify_record, KeyResolver, SigningKey, VerifyingKey};
pub use validate::{validate_consent_record, validate_document};
