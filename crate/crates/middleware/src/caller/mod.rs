//! Caller-side client: consent handshake, staleness detection,
//! re-consent, adherence before every skill call, and a mirror chain.

mod config;
mod staleness;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use acap_core::chain::StoreError;
use acap_core::signing::SignatureError;
use acap_core::{
    compute_capability_hash, diff_policies, evaluate_action, new_record_id, sign_in_place,
    ActionContext, AdherenceDecision, AdherenceEvent, AuditDocument, CanonicalError,
    CapabilityManifest, ChainStore, ConsentRecord, ParsedClaim, PolicyDocument, ReconsentTrigger,
    Timestamp,
};

use crate::card::{AgentCard, ADHERENCE_PATH, AGENT_CARD_PATH, AUDIT_PATH, SKILLS_PATH};
use crate::wire::{
    codes, AdherenceAck, ConsentAck, ErrorBody, SkillGateError, SkillRequest, SkillResponse,
};

pub use config::{CallerConfig, CallerSettings};
pub use staleness::{derive_decision, detect_staleness};

#[derive(Debug, Error)]
pub enum CallerError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("callee answered {status}: {body}")]
    Callee { status: u16, body: ErrorBody },
    #[error("policy hash mismatch: card advertises {card}, document stores {stored}, content hashes to {computed}")]
    HashMismatch {
        card: String,
        stored: String,
        computed: String,
    },
    #[error("callee offers no mutually supported protocol version")]
    UnsupportedVersion,
    #[error("callee does not advertise skill '{0}'")]
    UnknownSkill(String),
    #[error("consent record '{0}' does not grant access")]
    ConsentNotGranted(String),
    #[error("no prior consent to supersede")]
    NoPriorConsent,
    #[error("skill call refused: {0}")]
    Gate(SkillGateError),
    #[error("mirror: {0}")]
    Mirror(#[from] StoreError),
    #[error("signing: {0}")]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

impl CallerError {
    /// The callee's structured error body, if the callee answered.
    pub fn body(&self) -> Option<&ErrorBody> {
        match self {
            CallerError::Callee { body, .. } => Some(body),
            _ => None,
        }
    }
}

/// Retries for requests that failed before the callee answered or were
/// answered with a 5xx. Safe because every submission carries its id.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff: Duration::from_millis(50),
        }
    }
}

/// Result of one skill attempt that reached a binding adherence decision.
#[derive(Debug, Clone, PartialEq)]
pub enum SkillOutcome {
    /// The adherence decision was permit and the skill ran.
    Completed {
        event: AdherenceEvent,
        response: SkillResponse,
    },
    /// Deny or escalate; the skill was not called.
    Denied { event: AdherenceEvent },
}

impl SkillOutcome {
    pub fn event(&self) -> &AdherenceEvent {
        match self {
            SkillOutcome::Completed { event, .. } | SkillOutcome::Denied { event } => event,
        }
    }
}

/// What the caller knows about one callee.
#[derive(Default)]
struct Session {
    callee_id: Option<String>,
    card: Option<AgentCard>,
    /// Document the tail record covers.
    policy: Option<PolicyDocument>,
    /// Principal the tail record was made for.
    principal: Option<String>,
}

/// Client for one caller identity talking to any number of callees.
pub struct AcapCaller {
    config: RwLock<CallerConfig>,
    http: reqwest::Client,
    mirror: Arc<ChainStore>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for AcapCaller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AcapCaller")
            .field("config", &*self.config.read().expect("config lock"))
            .finish_non_exhaustive()
    }
}

fn base(url: &str) -> &str {
    url.trim_end_matches('/')
}

impl AcapCaller {
    pub fn new(config: CallerConfig) -> Self {
        Self::with_mirror(config, Arc::new(ChainStore::new()))
    }

    /// Uses `mirror` (for example a journaled store) as the local copy.
    pub fn with_mirror(config: CallerConfig, mirror: Arc<ChainStore>) -> Self {
        AcapCaller {
            config: RwLock::new(config),
            http: reqwest::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .expect("http client builds"),
            mirror,
            sessions: Mutex::new(HashMap::new()),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn caller_id(&self) -> String {
        self.config
            .read()
            .expect("config lock")
            .caller_agent_id
            .clone()
    }

    pub fn mirror(&self) -> &Arc<ChainStore> {
        &self.mirror
    }

    /// Replaces the capability manifest; the next call re-consents.
    pub fn set_capability_manifest(&self, manifest: CapabilityManifest) {
        self.config
            .write()
            .expect("config lock")
            .capability_manifest = manifest;
    }

    /// Changes the accountable principal; the next call re-consents.
    pub fn set_principal(&self, principal_id: impl Into<String>) {
        self.config.write().expect("config lock").principal_id = principal_id.into();
    }

    fn config(&self) -> CallerConfig {
        self.config.read().expect("config lock").clone()
    }

    pub fn capability_hash(&self) -> Result<String, CanonicalError> {
        compute_capability_hash(&self.config.read().expect("config lock").capability_manifest)
    }

    fn session(&self, callee_url: &str) -> Arc<tokio::sync::Mutex<Session>> {
        self.sessions
            .lock()
            .expect("session lock")
            .entry(base(callee_url).to_owned())
            .or_default()
            .clone()
    }

    async fn get<R: DeserializeOwned>(&self, url: &str) -> Result<R, CallerError> {
        self.send(|| self.http.get(url)).await
    }

    async fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, CallerError> {
        self.send(|| self.http.post(url).json(body)).await
    }

    async fn send<R: DeserializeOwned>(
        &self,
        request: impl Fn() -> reqwest::RequestBuilder,
    ) -> Result<R, CallerError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let last = attempt >= self.retry.attempts.max(1);
            match request().send().await {
                Ok(resp) if resp.status().is_success() => return Ok(resp.json().await?),
                Ok(resp) if resp.status().is_server_error() && !last => {}
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().await?;
                    let body = serde_json::from_str(&text)
                        .unwrap_or_else(|_| ErrorBody::new(codes::MALFORMED_BODY, text));
                    return Err(CallerError::Callee { status, body });
                }
                Err(e) if !last && (e.is_connect() || e.is_timeout() || e.is_request()) => {}
                Err(e) => return Err(e.into()),
            }
            tokio::time::sleep(self.retry.backoff * attempt).await;
        }
    }

    pub async fn fetch_card(&self, callee_url: &str) -> Result<AgentCard, CallerError> {
        self.get(&format!("{}{AGENT_CARD_PATH}", base(callee_url)))
            .await
    }

    /// Fetches the document the card points to and checks that its content
    /// hash equals both its stored hash and the card's `document_hash`.
    pub async fn fetch_policy(&self, card: &AgentCard) -> Result<PolicyDocument, CallerError> {
        let doc: PolicyDocument = self.get(&card.usage_policy.document_uri).await?;
        let computed = acap_core::compute_policy_hash(&doc)?;
        if computed != doc.hash || computed != card.usage_policy.document_hash {
            return Err(CallerError::HashMismatch {
                card: card.usage_policy.document_hash.clone(),
                stored: doc.hash,
                computed,
            });
        }
        Ok(doc)
    }

    pub async fn fetch_audit(&self, callee_url: &str) -> Result<AuditDocument, CallerError> {
        let mut url =
            reqwest::Url::parse(&format!("{}{AUDIT_PATH}", base(callee_url))).map_err(|e| {
                CallerError::Callee {
                    status: 0,
                    body: ErrorBody::new(codes::MALFORMED_BODY, e.to_string()),
                }
            })?;
        url.query_pairs_mut()
            .append_pair("caller", &self.caller_id());
        self.get(url.as_str()).await
    }

    /// Imports the callee's audit export into the mirror; returns how many
    /// items were new.
    pub async fn sync_mirror(&self, callee_url: &str) -> Result<usize, CallerError> {
        let audit = self.fetch_audit(callee_url).await?;
        Ok(self.mirror.import(&audit)?)
    }

    /// Mirror tail for the callee behind `callee_url`, once known.
    pub async fn cached_consent(&self, callee_url: &str) -> Option<ConsentRecord> {
        let session = self.session(callee_url);
        let s = session.lock().await;
        self.mirror.tail(&self.caller_id(), s.callee_id.as_deref()?)
    }

    /// Returns a consent record valid for the callee's current card,
    /// performing the initial handshake or a re-consent as needed.
    pub async fn handshake(&self, callee_url: &str) -> Result<ConsentRecord, CallerError> {
        let session = self.session(callee_url);
        let mut s = session.lock().await;
        self.ensure_consent(&mut s, callee_url).await
    }

    async fn ensure_consent(
        &self,
        s: &mut Session,
        callee_url: &str,
    ) -> Result<ConsentRecord, CallerError> {
        let card = self.fetch_card(callee_url).await?;
        if card.negotiate().is_none() {
            return Err(CallerError::UnsupportedVersion);
        }
        let config = self.config();
        if s.callee_id.is_none() {
            // learn the callee's identity; a journaled mirror may already
            // hold consent from an earlier run
            let doc = self.fetch_policy(&card).await?;
            s.callee_id = Some(doc.publisher.clone());
            let tail = self.mirror.tail(&config.caller_agent_id, &doc.publisher);
            if tail.as_ref().is_some_and(|t| t.policy_hash == doc.hash) {
                s.policy = Some(doc);
            } else if tail.is_none() {
                return self.submit(s, card, doc, None).await;
            }
        }
        let callee_id = s.callee_id.clone().expect("set above");
        let Some(tail) = self.mirror.tail(&config.caller_agent_id, &callee_id) else {
            let doc = self.fetch_policy(&card).await?;
            return self.submit(s, card, doc, None).await;
        };
        let consented_principal = s
            .principal
            .clone()
            .unwrap_or_else(|| config.principal_id.clone());
        let trigger = detect_staleness(
            &tail,
            &consented_principal,
            &card,
            &self.capability_hash()?,
            &config.principal_id,
            Utc::now(),
        );
        match trigger {
            None => {
                s.card = Some(card);
                Ok(tail)
            }
            Some(trigger) => {
                let doc = self.fetch_policy(&card).await?;
                self.submit(s, card, doc, Some((tail, trigger))).await
            }
        }
    }

    /// Supersedes the current record for `trigger`.
    pub async fn reconsent(
        &self,
        trigger: ReconsentTrigger,
        callee_url: &str,
    ) -> Result<ConsentRecord, CallerError> {
        let session = self.session(callee_url);
        let mut s = session.lock().await;
        let card = self.fetch_card(callee_url).await?;
        if card.negotiate().is_none() {
            return Err(CallerError::UnsupportedVersion);
        }
        let doc = self.fetch_policy(&card).await?;
        let tail = self
            .mirror
            .tail(&self.caller_id(), &doc.publisher)
            .ok_or(CallerError::NoPriorConsent)?;
        s.callee_id = Some(doc.publisher.clone());
        self.submit(&mut s, card, doc, Some((tail, trigger))).await
    }

    /// Parses, builds, signs and posts a record; on acceptance appends it
    /// to the mirror.
    async fn submit(
        &self,
        s: &mut Session,
        card: AgentCard,
        doc: PolicyDocument,
        previous: Option<(ConsentRecord, ReconsentTrigger)>,
    ) -> Result<ConsentRecord, CallerError> {
        let config = self.config();
        let parsed = match &previous {
            Some((tail, ReconsentTrigger::PolicyBump)) => {
                self.reparse_changed(&config, s.policy.as_ref(), tail, &doc)
            }
            _ => config.parser.parse_document(&doc, &config.intent),
        };
        let mut record = ConsentRecord {
            id: new_record_id(),
            prev_id: previous.as_ref().map(|(t, _)| t.id.clone()),
            caller: config.caller_agent_id.clone(),
            callee: doc.publisher.clone(),
            policy_version: doc.version.clone(),
            policy_hash: doc.hash.clone(),
            decision: derive_decision(&parsed),
            parsed_claims: parsed,
            timestamp: Timestamp::now(),
            valid_until: config.valid_until.clone(),
            signature: String::new(),
            caller_capability_hash: compute_capability_hash(&config.capability_manifest)?,
            reconsent_trigger: previous.as_ref().map(|(_, t)| *t),
            chain_anchor: None,
        };
        if let Some(key) = &config.signing_key {
            sign_in_place(&mut record, key)?;
        }
        let _ack: ConsentAck = self
            .post(&card.usage_policy.acceptance_endpoint, &record)
            .await?;
        self.mirror.append_consent(record.clone(), &doc)?;
        s.card = Some(card);
        s.policy = Some(doc);
        s.principal = Some(config.principal_id);
        Ok(record)
    }

    /// For a version bump, claims retained from the consented version keep
    /// their earlier parse; added or changed claims are parsed afresh.
    fn reparse_changed(
        &self,
        config: &CallerConfig,
        old: Option<&PolicyDocument>,
        tail: &ConsentRecord,
        new: &PolicyDocument,
    ) -> Vec<ParsedClaim> {
        let retained: Vec<String> = match old {
            Some(old) if old.hash == tail.policy_hash => match diff_policies(old, new) {
                Ok(diff) => diff
                    .retained
                    .into_iter()
                    .filter(|id| old.claim(id) == new.claim(id))
                    .collect(),
                Err(_) => Vec::new(),
            },
            _ => Vec::new(),
        };
        new.claims
            .iter()
            .map(|claim| match tail.parsed(&claim.id) {
                Some(prior) if retained.contains(&claim.id) => prior.clone(),
                _ => config.parser.parse_claim(claim, &config.intent),
            })
            .collect()
    }

    /// Evaluates the skill's claims, records the adherence event and, only
    /// on a binding permit, calls the skill. Stale consent is renewed
    /// first; a callee that reports staleness mid-call gets one retry.
    pub async fn invoke_skill(
        &self,
        callee_url: &str,
        skill: &str,
        ctx: &ActionContext,
    ) -> Result<SkillOutcome, CallerError> {
        let mut retried = false;
        loop {
            match self.attempt_skill(callee_url, skill, ctx).await {
                Err(CallerError::Gate(g))
                    if g.code == crate::wire::GateCode::StaleConsent && !retried =>
                {
                    retried = true;
                }
                other => return other,
            }
        }
    }

    async fn attempt_skill(
        &self,
        callee_url: &str,
        skill: &str,
        ctx: &ActionContext,
    ) -> Result<SkillOutcome, CallerError> {
        let session = self.session(callee_url);
        let mut s = session.lock().await;
        let record = self.ensure_consent(&mut s, callee_url).await?;
        if !record.decision.grants_access() {
            return Err(CallerError::ConsentNotGranted(record.id));
        }
        let card = s.card.clone().expect("ensure_consent stores the card");
        let doc = match &s.policy {
            Some(doc) if doc.hash == record.policy_hash => doc.clone(),
            _ => {
                let doc = self.fetch_policy(&card).await?;
                s.policy = Some(doc.clone());
                doc
            }
        };
        let descriptor = card
            .skill(skill)
            .ok_or_else(|| CallerError::UnknownSkill(skill.to_owned()))?;
        let pairs: Vec<_> = descriptor
            .policy_claims
            .iter()
            .filter_map(|id| Some((doc.claim(id)?, record.parsed(id)?)))
            .collect();
        let eval = evaluate_action(skill, &pairs, ctx, &doc.version);
        let decisive = eval.decisive();
        let config = self.config();
        let mut event = AdherenceEvent {
            id: new_record_id(),
            prev_id: self
                .mirror
                .trail(&record.id)
                .and_then(|t| t.tail().map(|e| e.id.clone())),
            consent_record_id: record.id.clone(),
            action: skill.to_owned(),
            claim_id: decisive.claim_id.clone(),
            clause_ref: decisive.clause_ref.clone(),
            decision: eval.decision,
            reasoning: eval.event_reasoning(),
            timestamp: Timestamp::now(),
            context: ctx.entries.clone(),
            signature: String::new(),
        };
        if let Some(key) = &config.signing_key {
            sign_in_place(&mut event, key)?;
        }
        let ack: AdherenceAck = self
            .post(&format!("{}{ADHERENCE_PATH}", base(callee_url)), &event)
            .await
            .map_err(gate_error)?;
        self.mirror.append_adherence(ack.event.clone())?;
        drop(s);

        if ack.decision != AdherenceDecision::Permit {
            return Ok(SkillOutcome::Denied { event: ack.event });
        }
        let request = SkillRequest {
            caller: config.caller_agent_id,
            adherence_event_id: Some(ack.event_id.clone()),
            caller_capability_hash: compute_capability_hash(&config.capability_manifest)?,
            context: ctx.entries.clone(),
        };
        let response: SkillResponse = self
            .post(
                &format!("{}{SKILLS_PATH}/{skill}", base(callee_url)),
                &request,
            )
            .await
            .map_err(gate_error)?;
        Ok(SkillOutcome::Completed {
            event: ack.event,
            response,
        })
    }
}

fn gate_error(e: CallerError) -> CallerError {
    match e.body().and_then(ErrorBody::gate) {
        Some(g) => CallerError::Gate(g),
        None => e,
    }
}
