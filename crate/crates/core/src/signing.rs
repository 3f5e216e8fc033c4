//! Detached JWS (RFC 7515, appendix F) over a record's canonical JSON.
//!
//! The payload is the canonical form of the record with `signature` set to
//! the empty string. The compact serialization omits the payload segment:
//! `BASE64URL(header)..BASE64URL(signature)`. The only suite is ES256.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::{Signature, SigningKey as EcSigningKey, VerifyingKey as EcVerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonicalize, canonicalize_serializable, CanonicalError};
use crate::model::{AdherenceEvent, ConsentRecord};

pub const JWS_ALGORITHM: &str = "ES256";

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("invalid key material: {0}")]
    InvalidKey(String),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// A record that carries a detached signature over its own canonical form.
pub trait Signable: Serialize {
    fn signature(&self) -> &str;
    fn set_signature(&mut self, signature: String);
}

impl Signable for ConsentRecord {
    fn signature(&self) -> &str {
        &self.signature
    }
    fn set_signature(&mut self, signature: String) {
        self.signature = signature;
    }
}

impl Signable for AdherenceEvent {
    fn signature(&self) -> &str {
        &self.signature
    }
    fn set_signature(&mut self, signature: String) {
        self.signature = signature;
    }
}

/// Canonical bytes with the signature field blanked.
pub fn signing_payload<R: Signable>(record: &R) -> Result<Vec<u8>, CanonicalError> {
    let mut value = serde_json::to_value(record)?;
    value["signature"] = serde_json::Value::String(String::new());
    canonicalize(&value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JwsHeader {
    alg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kid: Option<String>,
}

/// ES256 private key plus the key id written into the JWS header.
#[derive(Clone)]
pub struct SigningKey {
    key: EcSigningKey,
    kid: Option<String>,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey")
            .field("kid", &self.kid)
            .finish_non_exhaustive()
    }
}

impl SigningKey {
    pub fn generate() -> Self {
        SigningKey {
            key: EcSigningKey::random(&mut rand_core::OsRng),
            kid: None,
        }
    }

    /// Parses a 32-byte secret scalar encoded as hex.
    pub fn from_hex(hex_secret: &str) -> Result<Self, SignatureError> {
        let bytes = hex::decode(hex_secret.trim())
            .map_err(|e| SignatureError::InvalidKey(format!("secret is not hex: {e}")))?;
        let key = EcSigningKey::from_slice(&bytes)
            .map_err(|e| SignatureError::InvalidKey(format!("bad P-256 secret: {e}")))?;
        Ok(SigningKey { key, kid: None })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.key.to_bytes())
    }

    pub fn with_kid(mut self, kid: impl Into<String>) -> Self {
        self.kid = Some(kid.into());
        self
    }

    pub fn kid(&self) -> Option<&str> {
        self.kid.as_deref()
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey(*self.key.verifying_key())
    }
}

/// ES256 public key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyingKey(EcVerifyingKey);

impl VerifyingKey {
    /// Parses a SEC1 point (compressed or uncompressed) encoded as hex.
    pub fn from_hex(hex_point: &str) -> Result<Self, SignatureError> {
        let bytes = hex::decode(hex_point.trim())
            .map_err(|e| SignatureError::InvalidKey(format!("public key is not hex: {e}")))?;
        EcVerifyingKey::from_sec1_bytes(&bytes)
            .map(VerifyingKey)
            .map_err(|e| SignatureError::InvalidKey(format!("bad P-256 point: {e}")))
    }

    /// Compressed SEC1 point as hex.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0.to_encoded_point(true).as_bytes())
    }
}

/// Produces the detached JWS for `record`; the caller stores it in the
/// record's `signature` field.
pub fn sign_record<R: Signable>(record: &R, key: &SigningKey) -> Result<String, SignatureError> {
    let header = JwsHeader {
        alg: JWS_ALGORITHM.to_owned(),
        kid: key.kid.clone(),
    };
    let header_b64 = URL_SAFE_NO_PAD.encode(canonicalize_serializable(&header)?);
    let payload_b64 = URL_SAFE_NO_PAD.encode(signing_payload(record)?);
    let signing_input = format!("{header_b64}.{payload_b64}");
    let signature: Signature = key.key.sign(signing_input.as_bytes());
    Ok(format!(
        "{header_b64}..{}",
        URL_SAFE_NO_PAD.encode(signature.to_bytes())
    ))
}

/// Signs `record` in place.
pub fn sign_in_place<R: Signable>(record: &mut R, key: &SigningKey) -> Result<(), SignatureError> {
    let signature = sign_record(record, key)?;
    record.set_signature(signature);
    Ok(())
}

/// True iff `record.signature` is a well-formed detached ES256 JWS that
/// verifies under `key` over the record's canonical form. Malformed or empty
/// signatures verify as false.
pub fn verify_record<R: Signable>(record: &R, key: &VerifyingKey) -> bool {
    let Some((header_b64, signature)) = split_detached(record.signature()) else {
        return false;
    };
    let Some(header) = decode_header(header_b64) else {
        return false;
    };
    if header.alg != JWS_ALGORITHM {
        return false;
    }
    let Ok(sig_bytes) = URL_SAFE_NO_PAD.decode(signature) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(&sig_bytes) else {
        return false;
    };
    let Ok(payload) = signing_payload(record) else {
        return false;
    };
    let signing_input = format!("{header_b64}.{}", URL_SAFE_NO_PAD.encode(payload));
    key.0.verify(signing_input.as_bytes(), &sig).is_ok()
}

/// The `kid` header of a detached JWS, when present and well formed.
pub fn signature_kid(signature: &str) -> Option<String> {
    let (header_b64, _) = split_detached(signature)?;
    decode_header(header_b64)?.kid
}

fn split_detached(jws: &str) -> Option<(&str, &str)> {
    let mut parts = jws.split('.');
    let (header, payload, signature) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || !payload.is_empty() || header.is_empty() || signature.is_empty() {
        return None;
    }
    Some((header, signature))
}

fn decode_header(header_b64: &str) -> Option<JwsHeader> {
    let bytes = URL_SAFE_NO_PAD.decode(header_b64).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Resolves a signer's verification key, typically by JWS `kid`.
pub trait KeyResolver {
    fn resolve(&self, kid: &str) -> Option<VerifyingKey>;
}

impl KeyResolver for std::collections::HashMap<String, VerifyingKey> {
    fn resolve(&self, kid: &str) -> Option<VerifyingKey> {
        self.get(kid).copied()
    }
}

impl KeyResolver for std::collections::BTreeMap<String, VerifyingKey> {
    fn resolve(&self, kid: &str) -> Option<VerifyingKey> {
        self.get(kid).copied()
    }
}

/// Checks a non-empty signature against the key its `kid` names.
pub fn verify_with_resolver<R: Signable>(record: &R, keys: &dyn KeyResolver) -> SignatureCheck {
    if record.signature().is_empty() {
        return SignatureCheck::Unsigned;
    }
    let Some(kid) = signature_kid(record.signature()) else {
        return SignatureCheck::Invalid;
    };
    match keys.resolve(&kid) {
        None => SignatureCheck::UnknownSigner(kid),
        Some(key) if verify_record(record, &key) => SignatureCheck::Valid,
        Some(_) => SignatureCheck::Invalid,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignatureCheck {
    Unsigned,
    Valid,
    Invalid,
    UnknownSigner(String),
}
