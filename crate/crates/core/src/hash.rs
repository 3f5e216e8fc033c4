//! Content addressing with the empty-field bootstrapping convention: the
//! field that will hold the digest is blanked before hashing, so the digest
//! input never contains the digest itself.

use sha2::{Digest, Sha256};

use crate::canonical::{canonicalize_serializable, CanonicalError};
use crate::model::{CapabilityManifest, PolicyDocument};

pub const HASH_PREFIX: &str = "sha256:";

/// `"sha256:"` followed by the lowercase hex SHA-256 of `bytes`.
pub fn tagged_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(HASH_PREFIX.len() + 64);
    out.push_str(HASH_PREFIX);
    out.push_str(&hex::encode(digest));
    out
}

/// Whether `s` has the `sha256:` + 64 lowercase hex shape.
pub fn is_tagged_sha256(s: &str) -> bool {
    s.strip_prefix(HASH_PREFIX).is_some_and(|hex| {
        hex.len() == 64 && hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
    })
}

pub fn compute_policy_hash(doc: &PolicyDocument) -> Result<String, CanonicalError> {
    let mut value = serde_json::to_value(doc)?;
    value["hash"] = serde_json::Value::String(String::new());
    Ok(tagged_sha256(&crate::canonical::canonicalize(&value)?))
}

pub fn compute_capability_hash(manifest: &CapabilityManifest) -> Result<String, CanonicalError> {
    let blank = CapabilityManifest {
        caller_capability_hash: String::new(),
        ..manifest.clone()
    };
    Ok(tagged_sha256(&canonicalize_serializable(&blank)?))
}
