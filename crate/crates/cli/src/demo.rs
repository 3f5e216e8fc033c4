use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use acap_core::fixtures::{AGGREGATION_CLAIM, DEMO_SKILL};
use acap_core::{
    validate_adherence_trail, validate_consent_chain, ActionContext, AdherenceDecision,
    AdherenceEvent, AuditDocument, ConsentDecision, ConsentRecord, PolicyDocument,
};
use acap_middleware::callee::spawn;
use acap_middleware::demo::{demo_caller_config, demo_service};
use acap_middleware::wire::SkillResponse;
use acap_middleware::{AcapCaller, AdherenceMode, CallerError, SkillOutcome};

use crate::{CliError, Output};

/// Purposes tried in order; the first must be denied, the second permitted.
pub const DEMO_PURPOSES: [&str; 2] = ["behavioural_profiling", "statistical_analysis"];
pub const TIME_LIMIT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Default)]
pub struct DemoArgs {
    /// Port for the in-process callee; 0 picks a free one.
    pub callee_port: u16,
    /// Talk to an already running callee instead of starting one.
    pub callee_url: Option<String>,
    pub mode: AdherenceMode,
    pub audit_out: Option<PathBuf>,
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoCall {
    pub skill: String,
    pub purpose: String,
    pub event: AdherenceEvent,
    pub skill_ran: bool,
    pub response: Option<SkillResponse>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub callee_url: String,
    pub policy_version: String,
    pub policy_hash: String,
    pub consent: ConsentRecord,
    pub calls: Vec<DemoCall>,
    pub audit: AuditDocument,
    pub checks: Vec<Check>,
    pub elapsed_ms: u128,
    #[serde(skip)]
    pub policy: PolicyDocument,
}

impl DemoReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The run with ids and timestamps left out; equal across runs.
    pub fn outcome(&self) -> Value {
        let calls: Vec<_> = self
            .calls
            .iter()
            .map(|c| {
                json!({
                    "purpose": c.purpose,
                    "decision": c.event.decision,
                    "claim_id": c.event.claim_id,
                    "reasoning": c.event.reasoning,
                    "skill_ran": c.skill_ran,
                    "result": c.response.as_ref().map(|r| &r.result),
                })
            })
            .collect();
        let trails: Vec<_> = self
            .audit
            .adherence_trails
            .iter()
            .map(|t| {
                t.events
                    .iter()
                    .map(|e| e.prev_event_id.is_some())
                    .collect::<Vec<_>>()
            })
            .collect();
        json!({
            "policy_version": self.policy_version,
            "policy_hash": self.policy_hash,
            "decision": self.consent.decision,
            "parsed_claims": self.consent.parsed_claims,
            "calls": calls,
            "audit_records": self.audit.consent_chain.len(),
            "audit_trails": trails,
            "checks": self.checks.iter().map(|c| (&c.name, c.pass)).collect::<Vec<_>>(),
        })
    }
}

fn check(name: &str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

fn caller_err(e: CallerError) -> CliError {
    CliError::failed(format!("caller: {e}"))
}

fn checks(report: &DemoReport) -> Vec<Check> {
    let mut out = Vec::new();
    let c = &report.consent;
    out.push(check(
        "consent accepted with 3 parsed claims",
        c.decision == ConsentDecision::Accepted && c.parsed_claims.len() == 3,
        format!(
            "{} with {} parsed claims",
            c.decision.as_str(),
            c.parsed_claims.len()
        ),
    ));

    let deny = &report.calls[0];
    out.push(check(
        "behavioural_profiling denied before skill execution",
        deny.event.decision == AdherenceDecision::Deny
            && deny.event.claim_id == AGGREGATION_CLAIM
            && !deny.skill_ran,
        format!(
            "{} on {}, skill ran: {}",
            deny.event.decision.as_str(),
            deny.event.claim_id,
            deny.skill_ran
        ),
    ));

    let permit = &report.calls[1];
    let authorized = permit.response.as_ref().map(|r| r.authorized_by.as_str());
    out.push(check(
        "statistical_analysis permitted with authorizing event id",
        permit.event.decision == AdherenceDecision::Permit
            && permit.skill_ran
            && authorized == Some(permit.event.id.as_str()),
        format!(
            "{}, authorized by {}",
            permit.event.decision.as_str(),
            authorized.unwrap_or("-")
        ),
    ));

    let audit = &report.audit;
    let events: Vec<_> = audit
        .adherence_trails
        .iter()
        .flat_map(|t| &t.events)
        .collect();
    let linked = audit.consent_chain.len() == 1
        && audit.consent_chain[0].prev_record_id.is_none()
        && audit.consent_chain[0].record.id == c.id
        && events.len() == 2
        && events[0].prev_event_id.is_none()
        && events[1].prev_event_id.as_deref() == Some(events[0].event.id.as_str())
        && audit.link_mismatches().is_empty();
    out.push(check(
        "audit shows linked prev_record_id and prev_event_id",
        linked,
        format!(
            "{} record(s), {} event(s)",
            audit.consent_chain.len(),
            events.len()
        ),
    ));

    let verbatim = events.len() == report.calls.len()
        && events.iter().zip(&report.calls).all(|(e, call)| {
            e.event.reasoning == call.event.reasoning && e.event.id == call.event.id
        });
    out.push(check(
        "audit reasoning verbatim",
        verbatim,
        "caller and callee copies compared",
    ));

    let records = audit.records();
    let mut report_v = validate_consent_chain(&records, std::slice::from_ref(&report.policy), None);
    for trail in audit.trails() {
        report_v.extend(validate_adherence_trail(trail.events(), &records, None));
    }
    out.push(check(
        "audit re-validates",
        report_v.is_valid(),
        format!("{} violation(s)", report_v.violations.len()),
    ));

    out.push(check(
        "completes within 10 s",
        report.elapsed_ms < TIME_LIMIT.as_millis(),
        format!("{} ms", report.elapsed_ms),
    ));
    out
}

async fn session(caller: &AcapCaller, url: &str, start: Instant) -> Result<DemoReport, CliError> {
    let card = caller.fetch_card(url).await.map_err(caller_err)?;
    let policy = caller.fetch_policy(&card).await.map_err(caller_err)?;
    let consent = caller.handshake(url).await.map_err(caller_err)?;

    let mut calls = Vec::new();
    for purpose in DEMO_PURPOSES {
        let ctx = ActionContext::new()
            .with("purpose", purpose)
            .with("retention_days", 0);
        let outcome = caller
            .invoke_skill(url, DEMO_SKILL, &ctx)
            .await
            .map_err(caller_err)?;
        let (event, response) = match outcome {
            SkillOutcome::Completed { event, response } => (event, Some(response)),
            SkillOutcome::Denied { event } => (event, None),
        };
        calls.push(DemoCall {
            skill: DEMO_SKILL.into(),
            purpose: purpose.into(),
            skill_ran: response.is_some(),
            event,
            response,
        });
    }
    let audit = caller.fetch_audit(url).await.map_err(caller_err)?;
    let mut report = DemoReport {
        callee_url: url.to_owned(),
        policy_version: card.usage_policy.version.clone(),
        policy_hash: card.usage_policy.document_hash.clone(),
        consent,
        calls,
        audit,
        checks: Vec::new(),
        elapsed_ms: start.elapsed().as_millis(),
        policy,
    };
    report.checks = checks(&report);
    Ok(report)
}

/// Runs handshake, a denied and a permitted skill call and the audit fetch
/// against the demo callee over loopback HTTP.
pub fn run_demo(args: &DemoArgs) -> Result<DemoReport, CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::failed(format!("runtime: {e}")))?;
    let report = runtime.block_on(async {
        let start = Instant::now();
        let caller = AcapCaller::new(demo_caller_config());
        match &args.callee_url {
            Some(url) => session(&caller, url.trim_end_matches('/'), start).await,
            None => {
                let listener = TcpListener::bind(("127.0.0.1", args.callee_port))
                    .await
                    .map_err(|e| CliError::failed(format!("port {}: {e}", args.callee_port)))?;
                let addr = listener
                    .local_addr()
                    .map_err(|e| CliError::failed(e.to_string()))?;
                let url = format!("http://{addr}");
                let service = Arc::new(demo_service(&url, args.mode));
                let callee =
                    spawn(listener, service).map_err(|e| CliError::failed(e.to_string()))?;
                let report = session(&caller, &url, start).await;
                callee
                    .stop()
                    .await
                    .map_err(|e| CliError::failed(e.to_string()))?;
                report
            }
        }
    })?;
    let write = |path: &PathBuf, value: Value| {
        let bytes = serde_json::to_vec_pretty(&value).expect("JSON values serialize");
        std::fs::write(path, bytes)
            .map_err(|e| CliError::failed(format!("writing {}: {e}", path.display())))
    };
    if let Some(path) = &args.audit_out {
        write(
            path,
            serde_json::to_value(&report.audit).expect("audit serializes"),
        )?;
    }
    if let Some(path) = &args.policy_out {
        write(
            path,
            serde_json::to_value(&report.policy).expect("policy serializes"),
        )?;
    }
    Ok(report)
}

fn short(id: &str) -> &str {
    id.get(..8).unwrap_or(id)
}

pub fn render(r: &DemoReport) -> String {
    let mut t = String::new();
    t.push_str(&format!("callee {}\n", r.callee_url));
    t.push_str(&format!(
        "usage policy v{} {}\n\n",
        r.policy_version, r.policy_hash
    ));

    t.push_str(&format!(
        "consent record {} decision={}\n",
        r.consent.id,
        r.consent.decision.as_str()
    ));
    for p in &r.consent.parsed_claims {
        let verdict = if p.disputed { "disputed" } else { "accepted" };
        let understood = if p.understood {
            "understood"
        } else {
            "not understood"
        };
        t.push_str(&format!("  {:<32} {understood}, {verdict}\n", p.claim_id));
    }

    for (i, call) in r.calls.iter().enumerate() {
        let e = &call.event;
        t.push_str(&format!(
            "\ncall {}: {} purpose={}\n  adherence {} {} on {} {}\n  reasoning: {}\n",
            i + 1,
            call.skill,
            call.purpose,
            e.id,
            e.decision.as_str(),
            e.claim_id,
            e.clause_ref,
            e.reasoning
        ));
        match &call.response {
            Some(resp) => t.push_str(&format!(
                "  skill ran, authorized by {}: {}\n",
                resp.authorized_by, resp.result
            )),
            None => t.push_str("  skill not invoked\n"),
        }
    }

    t.push_str(&format!(
        "\naudit {} -> {}\n",
        r.audit.caller, r.audit.callee
    ));
    for entry in &r.audit.consent_chain {
        t.push_str(&format!(
            "  record {} prev_record_id={}\n",
            short(&entry.record.id),
            entry.prev_record_id.as_deref().map_or("null", short)
        ));
    }
    for trail in &r.audit.adherence_trails {
        for e in &trail.events {
            t.push_str(&format!(
                "  event  {} prev_event_id={} {}\n",
                short(&e.event.id),
                e.prev_event_id.as_deref().map_or("null", short),
                e.event.decision.as_str()
            ));
        }
    }

    t.push('\n');
    for c in &r.checks {
        t.push_str(&format!(
            "{} {} ({})\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    t.push_str(&format!("elapsed {} ms", r.elapsed_ms));
    t
}

/// Exit 0 iff every demo check passes.
pub fn cmd_demo(args: &DemoArgs) -> Result<Output, CliError> {
    let report = run_demo(args)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["passed"] = json!(report.passed());
    Ok(Output::new(report.passed(), render(&report), json))
}
