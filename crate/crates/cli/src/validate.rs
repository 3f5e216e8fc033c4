use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use acap_core::report::codes;
use acap_core::{
    validate_adherence_trail, validate_consent_chain, validate_document, AdherenceEvent,
    AuditDocument, ConsentRecord, KeyResolver, PolicyDocument, ValidationReport, VerifyingKey,
};

use crate::{read_json, CliError, Output};

#[derive(Debug, Clone, Default)]
pub struct ValidateArgs {
    /// A JSON array of consent records, or an audit export (which also
    /// supplies the trails).
    pub chain: PathBuf,
    /// JSON arrays of adherence events.
    pub trails: Vec<PathBuf>,
    pub policies: Vec<PathBuf>,
    /// `kid=hex` verification keys; signatures are checked only when some
    /// key is given.
    pub keys: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub subject: String,
    pub items: usize,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub valid: bool,
    pub sections: Vec<Section>,
}

fn parse_key(spec: &str) -> Result<(String, VerifyingKey), CliError> {
    let (kid, hex) = spec
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("key '{spec}' is not kid=hex")))?;
    let key =
        VerifyingKey::from_hex(hex).map_err(|e| CliError::input(format!("key '{kid}': {e}")))?;
    Ok((kid.to_owned(), key))
}

/// Runs the document, chain and trail validators over the given files.
pub fn run_validate(args: &ValidateArgs) -> Result<ValidateReport, CliError> {
    let chain_value: Value = read_json(&args.chain)?;
    let shape_err = |path: &Path, e: serde_json::Error| {
        CliError::input(format!("parsing {}: {e}", path.display()))
    };
    let (records, mut trails, audit) = if chain_value.get("consent_chain").is_some() {
        let audit: AuditDocument =
            serde_json::from_value(chain_value).map_err(|e| shape_err(&args.chain, e))?;
        let trails: Vec<(String, Vec<AdherenceEvent>)> = audit
            .trails()
            .into_iter()
            .map(|t| (t.consent_record_id.clone(), t.events().to_vec()))
            .collect();
        (audit.records(), trails, Some(audit))
    } else {
        let records: Vec<ConsentRecord> =
            serde_json::from_value(chain_value).map_err(|e| shape_err(&args.chain, e))?;
        (records, Vec::new(), None)
    };
    for path in &args.trails {
        let events: Vec<AdherenceEvent> = read_json(path)?;
        let anchor = events
            .first()
            .map(|e| e.consent_record_id.clone())
            .unwrap_or_default();
        trails.push((anchor, events));
    }
    let docs = args
        .policies
        .iter()
        .map(|p| read_json::<PolicyDocument>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let keys = args
        .keys
        .iter()
        .map(|k| parse_key(k))
        .collect::<Result<HashMap<_, _>, _>>()?;
    let resolver = (!keys.is_empty()).then_some(&keys as &dyn KeyResolver);

    let mut sections = Vec::new();
    for doc in &docs {
        sections.push(Section {
            subject: format!("policy {}", doc.version),
            items: doc.claims.len(),
            report: validate_document(doc),
        });
    }
    let mut chain_report = validate_consent_chain(&records, &docs, resolver);
    if let Some(audit) = &audit {
        for id in audit.link_mismatches() {
            chain_report.push(
                codes::BROKEN_LINK,
                None,
                format!("'{id}': repeated link disagrees with the embedded object"),
            );
        }
    }
    sections.push(Section {
        subject: "consent chain".into(),
        items: records.len(),
        report: chain_report,
    });
    for (anchor, events) in &trails {
        sections.push(Section {
            subject: format!("adherence trail {anchor}"),
            items: events.len(),
            report: validate_adherence_trail(events, &records, resolver),
        });
    }
    Ok(ValidateReport {
        valid: sections.iter().all(|s| s.report.is_valid()),
        sections,
    })
}

/// Exit 0 when everything validates, 1 on violations, 2 when a file cannot
/// be read or parsed.
pub fn cmd_validate(args: &ValidateArgs) -> Result<Output, CliError> {
    let report = run_validate(args)?;
    let mut text = String::new();
    for s in &report.sections {
        let status = if s.report.is_valid() {
            "valid"
        } else {
            "INVALID"
        };
        text.push_str(&format!("{}: {} item(s), {status}\n", s.subject, s.items));
        for v in &s.report.violations {
            text.push_str(&format!("  {v}\n"));
        }
    }
    let json = serde_json::to_value(&report).expect("report serializes");
    Ok(Output::new(report.valid, text.trim_end().to_owned(), json))
}
