//! Callee-side service: publishes the card and policy, accepts consent and
//! adherence submissions, gates skills and serves the audit export.

mod config;
mod http;

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;
use serde_json::Value;
use thiserror::Error;

use acap_core::chain::{AppendOutcome, StoreError};
use acap_core::report::codes as vcodes;
use acap_core::signing::{verify_with_resolver, Signable, SignatureCheck};
use acap_core::{
    blocked_claims, consent_status, evaluate_action, sign_in_place, validate_consent_record,
    validate_document, ActionContext, AdherenceDecision, AdherenceEvent, AuditDocument, ChainError,
    ChainStore, ConsentRecord, ConsentStatus, PolicyDocument, SigningKey, ValidUntil,
    ValidationReport, VerifyingKey,
};

use crate::card::{AdherenceMode, AgentCard, SkillDescriptor};
use crate::wire::{
    codes, AdherenceAck, ConsentAck, ErrorBody, GateCode, SkillGateError, SkillRequest,
    SkillResponse, Stored,
};

pub(crate) use config::read_toml;
pub use config::{CalleeConfig, ConfigError};
pub use http::{router, serve, spawn, RunningCallee};

/// Executes a skill once the gate has permitted the call.
pub type SkillHandler = Arc<dyn Fn(&ActionContext) -> Value + Send + Sync>;

struct Skill {
    descriptor: SkillDescriptor,
    handler: SkillHandler,
}

/// One published policy version with its card, serialized once so both
/// well-known responses always come from the same version.
#[derive(Debug)]
pub struct Published {
    pub doc: PolicyDocument,
    pub card: AgentCard,
    pub policy_bytes: Vec<u8>,
    pub card_bytes: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no usage policy is published")]
    NoPolicy,
    #[error("malformed body: {0}")]
    Malformed(String),
    #[error("policy cannot be published: {0}")]
    InvalidPolicy(ValidationReport),
    #[error("consent record rejected: {0}")]
    ConsentRejected(ValidationReport),
    #[error("adherence event rejected: {0}")]
    AdherenceRejected(ValidationReport),
    #[error("link conflict: {0}")]
    Conflict(ValidationReport),
    #[error("event references unknown consent record '{0}'")]
    Unanchored(String),
    #[error(transparent)]
    Gate(#[from] SkillGateError),
    #[error("unknown skill '{0}'")]
    UnknownSkill(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NoPolicy => 503,
            ServiceError::Malformed(_)
            | ServiceError::InvalidPolicy(_)
            | ServiceError::ConsentRejected(_)
            | ServiceError::AdherenceRejected(_) => 400,
            ServiceError::Conflict(_) => 409,
            ServiceError::Unanchored(_) | ServiceError::UnknownSkill(_) => 404,
            ServiceError::Gate(_) => 403,
            ServiceError::Storage(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let with_report = |code: &str, report: &ValidationReport| ErrorBody {
            violations: report.violations.clone(),
            ..ErrorBody::new(code, self.to_string())
        };
        match self {
            ServiceError::NoPolicy => ErrorBody::new(codes::POLICY_UNAVAILABLE, self.to_string()),
            ServiceError::Malformed(_) => ErrorBody::new(codes::MALFORMED_BODY, self.to_string()),
            ServiceError::InvalidPolicy(r) => with_report(codes::POLICY_UNAVAILABLE, r),
            ServiceError::ConsentRejected(r) => with_report(codes::CONSENT_REJECTED, r),
            ServiceError::AdherenceRejected(r) => with_report(codes::ADHERENCE_REJECTED, r),
            ServiceError::Conflict(r) => with_report(codes::LINK_CONFLICT, r),
            ServiceError::Unanchored(_) => {
                ErrorBody::new(vcodes::UNANCHORED_EVENT, self.to_string())
            }
            ServiceError::Gate(g) => g.clone().into(),
            ServiceError::UnknownSkill(_) => ErrorBody::new(codes::UNKNOWN_SKILL, self.to_string()),
            ServiceError::Storage(_) => ErrorBody::new(codes::STORAGE_ERROR, self.to_string()),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Chain(c) => chain_error(c),
            other => ServiceError::Storage(other.to_string()),
        }
    }
}

fn chain_error(e: ChainError) -> ServiceError {
    let mut report = ValidationReport::new();
    let code = match &e {
        ChainError::BrokenLink { .. } => vcodes::BROKEN_LINK,
        ChainError::DuplicateId(_) => vcodes::DUPLICATE_ID,
        ChainError::WrongKey(_) => vcodes::MIXED_CHAIN,
        ChainError::InvalidRecord(r) => return ServiceError::ConsentRejected(r.clone()),
        ChainError::UnanchoredEvent(id) => return ServiceError::Unanchored(id.clone()),
        ChainError::MissingReasoning(_) => vcodes::MISSING_REASONING,
    };
    report.push(code, None, e.to_string());
    if e.is_conflict() {
        ServiceError::Conflict(report)
    } else {
        ServiceError::AdherenceRejected(report)
    }
}

/// Rejections made only of link problems are conflicts; anything else is
/// a content problem.
fn rejection(
    report: ValidationReport,
    content: fn(ValidationReport) -> ServiceError,
) -> ServiceError {
    let link_only = report
        .violations
        .iter()
        .all(|v| v.code == vcodes::BROKEN_LINK || v.code == vcodes::DUPLICATE_ID);
    if link_only {
        ServiceError::Conflict(report)
    } else {
        content(report)
    }
}

/// A call the gate has let through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrantedCall {
    pub consent_record_id: String,
    pub adherence_event_id: String,
}

pub struct CalleeBuilder {
    callee_id: String,
    name: String,
    base_url: String,
    mode: AdherenceMode,
    skills: Vec<Skill>,
    store: Option<Arc<ChainStore>>,
    signing_key: Option<SigningKey>,
    caller_keys: HashMap<String, VerifyingKey>,
}

impl CalleeBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn adherence_mode(mut self, mode: AdherenceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn skill(mut self, descriptor: SkillDescriptor, handler: SkillHandler) -> Self {
        self.skills.push(Skill {
            descriptor,
            handler,
        });
        self
    }

    pub fn store(mut self, store: Arc<ChainStore>) -> Self {
        self.store = Some(store);
        self
    }

    /// Key used to re-sign events whose decision the callee overrides.
    pub fn signing_key(mut self, key: SigningKey) -> Self {
        self.signing_key = Some(key);
        self
    }

    pub fn caller_key(mut self, kid: impl Into<String>, key: VerifyingKey) -> Self {
        self.caller_keys.insert(kid.into(), key);
        self
    }

    pub fn build(self) -> CalleeService {
        let mut keys = self.caller_keys;
        if let Some(k) = &self.signing_key {
            if let Some(kid) = k.kid() {
                keys.insert(kid.to_owned(), k.verifying_key());
            }
        }
        CalleeService {
            callee_id: self.callee_id,
            name: self.name,
            base_url: self.base_url.trim_end_matches('/').to_owned(),
            mode: self.mode,
            skills: self.skills,
            published: RwLock::new(None),
            documents: RwLock::new(Vec::new()),
            store: self.store.unwrap_or_default(),
            keys: RwLock::new(keys),
            signing_key: self.signing_key,
            used_permits: Mutex::new(HashSet::new()),
        }
    }
}

/// The callee's protocol state. Every method is safe to call concurrently;
/// chain mutations go through the store's per-key lock.
pub struct CalleeService {
    callee_id: String,
    name: String,
    base_url: String,
    mode: AdherenceMode,
    skills: Vec<Skill>,
    published: RwLock<Option<Arc<Published>>>,
    documents: RwLock<Vec<PolicyDocument>>,
    store: Arc<ChainStore>,
    keys: RwLock<HashMap<String, VerifyingKey>>,
    signing_key: Option<SigningKey>,
    used_permits: Mutex<HashSet<String>>,
}

impl std::fmt::Debug for CalleeService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CalleeService")
            .field("callee_id", &self.callee_id)
            .field("base_url", &self.base_url)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl CalleeService {
    /// `callee_id` is the identity recorded in consent records and must be
    /// the publisher of every policy this service serves.
    pub fn builder(callee_id: impl Into<String>, base_url: impl Into<String>) -> CalleeBuilder {
        CalleeBuilder {
            callee_id: callee_id.into(),
            name: "acap-callee".into(),
            base_url: base_url.into(),
            mode: AdherenceMode::Local,
            skills: Vec::new(),
            store: None,
            signing_key: None,
            caller_keys: HashMap::new(),
        }
    }

    pub fn callee_id(&self) -> &str {
        &self.callee_id
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn mode(&self) -> AdherenceMode {
        self.mode
    }

    pub fn store(&self) -> &Arc<ChainStore> {
        &self.store
    }

    pub fn register_caller_key(&self, kid: impl Into<String>, key: VerifyingKey) {
        self.keys.write().expect("key lock").insert(kid.into(), key);
    }

    /// Every version published so far, oldest first.
    pub fn documents(&self) -> Vec<PolicyDocument> {
        self.documents.read().expect("documents lock").clone()
    }

    pub fn current(&self) -> Result<Arc<Published>, ServiceError> {
        self.published
            .read()
            .expect("publish lock")
            .clone()
            .ok_or(ServiceError::NoPolicy)
    }

    /// Validates `doc` and atomically replaces the served card and policy.
    /// Versions must increase; republishing the current document is a no-op.
    pub fn publish(&self, doc: PolicyDocument) -> Result<Arc<Published>, ServiceError> {
        let mut report = validate_document(&doc);
        if doc.publisher != self.callee_id {
            report.push(
                codes::WRONG_CALLEE,
                None,
                format!(
                    "publisher '{}' is not this callee '{}'",
                    doc.publisher, self.callee_id
                ),
            );
        }
        let descriptors: Vec<SkillDescriptor> =
            self.skills.iter().map(|s| s.descriptor.clone()).collect();
        let card = AgentCard::build(&self.name, &self.base_url, &doc, descriptors, self.mode)
            .map_err(|e| ServiceError::Storage(e.to_string()))?;
        for (skill, claim) in card.dangling_claims(&doc) {
            report.push(
                vcodes::UNEXPECTED_PARSED_CLAIM,
                None,
                format!(
                    "skill '{skill}' names claim '{claim}' absent from policy {}",
                    doc.version
                ),
            );
        }

        let mut slot = self.published.write().expect("publish lock");
        if let Some(current) = slot.as_ref() {
            if current.doc.hash == doc.hash {
                return Ok(current.clone());
            }
            if let (Ok(old), Ok(new)) = (current.doc.semver(), doc.semver()) {
                if new <= old {
                    report.push(
                        vcodes::INVALID_VERSION,
                        None,
                        format!(
                            "version {} does not follow published {}",
                            doc.version, current.doc.version
                        ),
                    );
                }
            }
        }
        if !report.is_valid() {
            return Err(ServiceError::InvalidPolicy(report));
        }
        let published = Arc::new(Published {
            policy_bytes: serde_json::to_vec(&doc).expect("policy serializes"),
            card_bytes: serde_json::to_vec(&card).expect("card serializes"),
            doc: doc.clone(),
            card,
        });
        self.documents.write().expect("documents lock").push(doc);
        *slot = Some(published.clone());
        Ok(published)
    }

    fn document(&self, hash: &str) -> Option<PolicyDocument> {
        self.documents
            .read()
            .expect("documents lock")
            .iter()
            .find(|d| d.hash == hash)
            .cloned()
    }

    fn check_signature<R: Signable>(&self, item: &R, report: &mut ValidationReport) {
        let keys = self.keys.read().expect("key lock");
        match verify_with_resolver(item, &*keys) {
            SignatureCheck::Unsigned | SignatureCheck::Valid => {}
            SignatureCheck::Invalid => {
                report.push(vcodes::INVALID_SIGNATURE, None, "signature does not verify")
            }
            SignatureCheck::UnknownSigner(kid) => report.push(
                vcodes::UNKNOWN_SIGNER,
                None,
                format!("no key registered for '{kid}'"),
            ),
        }
    }

    /// Verifies completeness, policy binding, linkage and signature, then
    /// appends. A rejection lists every failed check.
    pub fn handle_consent(&self, record: ConsentRecord) -> Result<ConsentAck, ServiceError> {
        let published = self.current()?;
        let doc = &published.doc;

        if let Some(existing) = self.store.record(&record.id) {
            if existing == record {
                return Ok(self.consent_ack(&record, Stored::AlreadyPresent));
            }
            let mut report = ValidationReport::new();
            report.push(
                vcodes::DUPLICATE_ID,
                None,
                format!("record id '{}' is taken", record.id),
            );
            return Err(ServiceError::Conflict(report));
        }

        let mut report = ValidationReport::new();
        if record.callee != self.callee_id {
            report.push(
                codes::WRONG_CALLEE,
                None,
                format!(
                    "record names callee '{}', this is '{}'",
                    record.callee, self.callee_id
                ),
            );
        }
        report.extend(validate_consent_record(&record, doc));
        let tail = self.store.tail(&record.caller, &record.callee);
        let expected = tail.map(|t| t.id);
        if record.prev_id != expected {
            report.push(
                vcodes::BROKEN_LINK,
                None,
                format!(
                    "prev_id {:?} but the chain tail is {expected:?}",
                    record.prev_id
                ),
            );
        }
        self.check_signature(&record, &mut report);
        if !report.is_valid() {
            return Err(rejection(report, ServiceError::ConsentRejected));
        }

        let stored = self.store.append_consent(record.clone(), doc)?;
        Ok(self.consent_ack(&record, stored.into()))
    }

    fn consent_ack(&self, record: &ConsentRecord, stored: Stored) -> ConsentAck {
        ConsentAck {
            record_id: record.id.clone(),
            chain_length: self
                .store
                .read(&record.caller, &record.callee, |c, _| c.len())
                .unwrap_or(0),
            stored,
        }
    }

    /// Appends an event anchored to the caller's current record. In
    /// delegated mode the callee's own evaluation decides, and a changed
    /// decision is stored in place of the caller's.
    pub fn handle_adherence(&self, event: AdherenceEvent) -> Result<AdherenceAck, ServiceError> {
        let published = self.current()?;
        let Some(record) = self.store.record(&event.consent_record_id) else {
            return Err(ServiceError::Unanchored(event.consent_record_id));
        };
        let doc = self
            .document(&record.policy_hash)
            .unwrap_or_else(|| published.doc.clone());

        if let Some(existing) = self.store.event(&record.id, &event.id) {
            let candidate = self.finalize(event, &record, &doc)?;
            if candidate == existing {
                return Ok(self.adherence_ack(existing, Stored::AlreadyPresent));
            }
            let mut report = ValidationReport::new();
            report.push(
                vcodes::DUPLICATE_ID,
                None,
                format!("event id '{}' is taken", candidate.id),
            );
            return Err(ServiceError::Conflict(report));
        }

        let tail = self.store.tail(&record.caller, &record.callee);
        if tail.as_ref().map(|t| &t.id) != Some(&record.id) {
            return Err(SkillGateError::new(
                GateCode::StaleConsent,
                format!("consent record '{}' has been superseded", record.id),
            )
            .into());
        }
        if record.policy_hash != published.doc.hash {
            return Err(SkillGateError::new(
                GateCode::StaleConsent,
                format!(
                    "consent covers policy {} but {} is published",
                    record.policy_version, published.doc.version
                ),
            )
            .into());
        }
        if let ValidUntil::At(deadline) = &record.valid_until {
            if deadline.parse().is_none_or(|d| Utc::now() > d) {
                return Err(SkillGateError::new(
                    GateCode::StaleConsent,
                    format!("consent expired at {deadline}"),
                )
                .into());
            }
        }
        if !record.decision.grants_access() {
            return Err(SkillGateError::new(
                GateCode::ConsentRequired,
                format!("consent record '{}' is {}", record.id, record.decision),
            )
            .into());
        }

        let mut report = ValidationReport::new();
        if event.reasoning.trim().is_empty() {
            report.push(vcodes::MISSING_REASONING, None, "reasoning is empty");
        }
        if event.timestamp.parse().is_none() {
            report.push(
                vcodes::INVALID_TIMESTAMP,
                None,
                format!(
                    "timestamp '{}' is not an ISO 8601 UTC timestamp",
                    event.timestamp
                ),
            );
        }
        self.check_signature(&event, &mut report);
        if !report.is_valid() {
            return Err(ServiceError::AdherenceRejected(report));
        }

        let event = self.finalize(event, &record, &doc)?;
        let stored = self.store.append_adherence(event.clone())?;
        if stored == AppendOutcome::AlreadyPresent {
            return Ok(self.adherence_ack(event, Stored::AlreadyPresent));
        }
        Ok(self.adherence_ack(event, Stored::Appended))
    }

    /// The event as it will be stored: unchanged in local mode; in
    /// delegated mode rewritten when the callee's decision differs.
    fn finalize(
        &self,
        mut event: AdherenceEvent,
        record: &ConsentRecord,
        doc: &PolicyDocument,
    ) -> Result<AdherenceEvent, ServiceError> {
        if self.mode == AdherenceMode::Local {
            return Ok(event);
        }
        let governing: Vec<&str> = match self.skill(&event.action) {
            Some(s) => s
                .descriptor
                .policy_claims
                .iter()
                .map(String::as_str)
                .collect(),
            None => doc.claim_ids().collect(),
        };
        let pairs: Vec<_> = governing
            .iter()
            .filter_map(|id| Some((doc.claim(id)?, record.parsed(id)?)))
            .collect();
        let ctx = ActionContext::from(event.context.clone());
        let eval = evaluate_action(&event.action, &pairs, &ctx, &doc.version);
        if eval.decision == event.decision {
            return Ok(event);
        }
        let decisive = eval.decisive();
        event.decision = eval.decision;
        event.claim_id = decisive.claim_id.clone();
        event.clause_ref = decisive.clause_ref.clone();
        event.reasoning = eval.event_reasoning();
        event.signature.clear();
        if let Some(key) = &self.signing_key {
            sign_in_place(&mut event, key).map_err(|e| ServiceError::Storage(e.to_string()))?;
        }
        Ok(event)
    }

    fn adherence_ack(&self, event: AdherenceEvent, stored: Stored) -> AdherenceAck {
        AdherenceAck {
            event_id: event.id.clone(),
            mode: self.mode,
            decision: event.decision,
            stored,
            event,
        }
    }

    fn skill(&self, name: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.descriptor.name == name)
    }

    /// Decides whether `caller` may run `skill` now. A permit consumes the
    /// authorizing adherence event.
    pub fn gate_skill(
        &self,
        skill: &str,
        caller: &str,
        adherence_event_id: Option<&str>,
        capability_hash: &str,
        context: &acap_core::ScalarMap,
    ) -> Result<GrantedCall, ServiceError> {
        let published = self.current()?;
        let skill = self
            .skill(skill)
            .ok_or_else(|| ServiceError::UnknownSkill(skill.to_owned()))?;
        let name = skill.descriptor.name.as_str();

        let verdict = self
            .store
            .read(caller, &self.callee_id, |chain, trails| {
                let record = match consent_status(
                    chain.records(),
                    &published.doc,
                    capability_hash,
                    Utc::now(),
                ) {
                    ConsentStatus::Missing => {
                        return Err(SkillGateError::new(
                            GateCode::ConsentRequired,
                            format!("no consent on record for '{caller}'"),
                        ))
                    }
                    ConsentStatus::NotGranted(r) => {
                        return Err(SkillGateError::new(
                            GateCode::ConsentRequired,
                            format!("consent record '{}' is {}", r.id, r.decision),
                        ))
                    }
                    ConsentStatus::Stale { record, reason } => {
                        return Err(SkillGateError::new(
                            GateCode::StaleConsent,
                            format!("consent record '{}' is stale: {reason:?}", record.id),
                        ))
                    }
                    ConsentStatus::Active(r) => r,
                };

                let blocked = blocked_claims(record);
                let blocking: Vec<String> = skill
                    .descriptor
                    .policy_claims
                    .iter()
                    .filter(|c| blocked.contains(*c))
                    .cloned()
                    .collect();
                if !blocking.is_empty() {
                    return Err(SkillGateError::blocked(blocking));
                }

                let required =
                    |detail: String| SkillGateError::new(GateCode::AdherenceRequired, detail);
                let event_id = adherence_event_id.ok_or_else(|| {
                    required(format!("no adherence event presented for '{name}'"))
                })?;
                let event = trails
                    .get(&record.id)
                    .and_then(|t| t.get(event_id))
                    .ok_or_else(|| {
                        required(format!(
                            "event '{event_id}' is not in the trail of '{}'",
                            record.id
                        ))
                    })?;
                if event.action != name {
                    return Err(required(format!(
                        "event '{event_id}' authorizes '{}'",
                        event.action
                    )));
                }
                if event.decision != AdherenceDecision::Permit {
                    return Err(required(format!(
                        "event '{event_id}' decided {}",
                        event.decision
                    )));
                }
                if blocked.contains(&event.claim_id) {
                    return Err(required(format!(
                        "event '{event_id}' cites disputed claim '{}'",
                        event.claim_id
                    )));
                }
                if event.context != *context {
                    return Err(required(format!(
                        "call context differs from the context evaluated by '{event_id}'"
                    )));
                }
                Ok(GrantedCall {
                    consent_record_id: record.id.clone(),
                    adherence_event_id: event.id.clone(),
                })
            })
            .unwrap_or_else(|| {
                Err(SkillGateError::new(
                    GateCode::ConsentRequired,
                    format!("no consent on record for '{caller}'"),
                ))
            })?;

        if !self
            .used_permits
            .lock()
            .expect("permit lock")
            .insert(verdict.adherence_event_id.clone())
        {
            return Err(SkillGateError::new(
                GateCode::AdherenceRequired,
                format!(
                    "event '{}' has already authorized a call",
                    verdict.adherence_event_id
                ),
            )
            .into());
        }
        Ok(verdict)
    }

    /// Gates and, on permit, runs the skill. No other path reaches a
    /// skill handler.
    pub fn invoke_skill(
        &self,
        name: &str,
        request: SkillRequest,
    ) -> Result<SkillResponse, ServiceError> {
        let granted = self.gate_skill(
            name,
            &request.caller,
            request.adherence_event_id.as_deref(),
            &request.caller_capability_hash,
            &request.context,
        )?;
        let skill = self.skill(name).expect("gate checked the skill exists");
        let result = (skill.handler)(&ActionContext::from(request.context));
        Ok(SkillResponse {
            skill: name.to_owned(),
            consent_record_id: granted.consent_record_id,
            authorized_by: granted.adherence_event_id,
            result,
        })
    }

    /// Audit export of `caller`'s chain with this callee; empty when unknown.
    pub fn audit(&self, caller: &str) -> AuditDocument {
        self.store.export(caller, &self.callee_id)
    }
}
