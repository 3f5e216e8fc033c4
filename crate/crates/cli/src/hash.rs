use std::path::Path;

use serde_json::{json, Value};

use acap_core::{compute_capability_hash, compute_policy_hash, CapabilityManifest, PolicyDocument};

use crate::{read_json, CliError, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Policy,
    CapabilityManifest,
}

impl DocumentKind {
    pub fn name(self) -> &'static str {
        match self {
            DocumentKind::Policy => "policy_document",
            DocumentKind::CapabilityManifest => "capability_manifest",
        }
    }
}

/// Policies carry `claims`; manifests carry `model_identifier`.
pub fn detect(value: &Value) -> Option<DocumentKind> {
    let object = value.as_object()?;
    if object.contains_key("claims") {
        Some(DocumentKind::Policy)
    } else if object.contains_key("model_identifier") {
        Some(DocumentKind::CapabilityManifest)
    } else {
        None
    }
}

/// Content hash of a policy document or capability manifest, with the
/// stored hash field excluded. Every failure exits 1.
pub fn cmd_hash(path: &Path) -> Result<Output, CliError> {
    let fail = |e: CliError| CliError::failed(e.message);
    let value: Value = read_json(path).map_err(fail)?;
    let kind = detect(&value).ok_or_else(|| {
        CliError::failed(format!(
            "{}: neither a policy document nor a capability manifest",
            path.display()
        ))
    })?;
    let parse_err = |e: serde_json::Error| CliError::failed(format!("{}: {e}", path.display()));
    let (hash, stored) = match kind {
        DocumentKind::Policy => {
            let doc: PolicyDocument = serde_json::from_value(value).map_err(parse_err)?;
            (compute_policy_hash(&doc), doc.hash)
        }
        DocumentKind::CapabilityManifest => {
            let manifest: CapabilityManifest = serde_json::from_value(value).map_err(parse_err)?;
            (
                compute_capability_hash(&manifest),
                manifest.caller_capability_hash,
            )
        }
    };
    let hash = hash.map_err(|e| CliError::failed(format!("{}: {e}", path.display())))?;
    let json = json!({
        "kind": kind.name(),
        "hash": hash,
        "stored_hash": stored,
        "stored_hash_matches": stored == hash,
    });
    Ok(Output::new(true, hash, json))
}
