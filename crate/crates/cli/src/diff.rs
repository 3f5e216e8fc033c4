use std::path::Path;

use serde_json::json;

use acap_core::{compute_policy_hash, diff_policies, PolicyDiff, PolicyDocument};

use crate::{read_json, CliError, Output};

/// Claim-level diff from `old` to a strictly newer `new`. Two copies of
/// the same document give an empty diff.
pub fn cmd_diff(old: &Path, new: &Path) -> Result<Output, CliError> {
    let old_doc: PolicyDocument = read_json(old)?;
    let new_doc: PolicyDocument = read_json(new)?;
    let hash =
        |d: &PolicyDocument| compute_policy_hash(d).map_err(|e| CliError::failed(e.to_string()));
    let diff = if old_doc.version == new_doc.version && hash(&old_doc)? == hash(&new_doc)? {
        PolicyDiff {
            added: Vec::new(),
            removed: Vec::new(),
            retained: old_doc.claims.iter().map(|c| c.id.clone()).collect(),
        }
    } else {
        diff_policies(&old_doc, &new_doc).map_err(|e| CliError::failed(e.to_string()))?
    };

    let mut text = format!("{} -> {}\n", old_doc.version, new_doc.version);
    for (label, ids) in [
        ("added", &diff.added),
        ("removed", &diff.removed),
        ("retained", &diff.retained),
    ] {
        text.push_str(&format!("{label} ({}):", ids.len()));
        for id in ids {
            text.push_str(&format!(" {id}"));
        }
        text.push('\n');
    }
    let json = json!({
        "from": old_doc.version,
        "to": new_doc.version,
        "added": diff.added,
        "removed": diff.removed,
        "retained": diff.retained,
    });
    Ok(Output::new(true, text.trim_end().to_owned(), json))
}
