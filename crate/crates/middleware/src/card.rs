//! The AgentCard and its consent extension.

use serde::{Deserialize, Serialize};

use acap_core::{compute_policy_hash, CanonicalError, PolicyDocument, Timestamp};

/// Protocol version spoken by this implementation.
pub const ACAP_VERSION: &str = "0.1";
/// Extension URI advertised in `capabilities.extensions`; versioned by its
/// last path segment.
pub const ACAP_EXTENSION_URI: &str = "https://acap.example.org/extensions/consent/v0.1";
pub const AGENT_CARD_PATH: &str = "/.well-known/agent-card.json";
pub const USAGE_POLICY_PATH: &str = "/.well-known/usage-policy.json";
pub const CONSENT_PATH: &str = "/acap/consent";
pub const ADHERENCE_PATH: &str = "/acap/adherence";
pub const AUDIT_PATH: &str = "/acap/audit";
pub const SKILLS_PATH: &str = "/skills";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdherenceMode {
    /// The caller's decision is recorded as submitted.
    #[default]
    Local,
    /// The callee re-evaluates every event and its decision is binding.
    Delegated,
}

impl std::str::FromStr for AdherenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(AdherenceMode::Local),
            "delegated" => Ok(AdherenceMode::Delegated),
            other => Err(format!(
                "unknown adherence mode '{other}' (expected local or delegated)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionParams {
    #[serde(rename = "minVersion")]
    pub min_version: String,
    #[serde(rename = "maxVersion")]
    pub max_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub uri: String,
    pub description: String,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ExtensionParams>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    #[serde(default)]
    pub extensions: Vec<Extension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsagePolicyRef {
    pub version: String,
    pub document_uri: String,
    pub document_hash: String,
    pub effective_date: Timestamp,
    pub acceptance_required: bool,
    pub acceptance_endpoint: String,
    pub natural_language_uri: String,
    #[serde(default)]
    pub adherence_mode: AdherenceMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDescriptor {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Claims governing the skill; each must exist in the current policy.
    pub policy_claims: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentCard {
    pub name: String,
    pub url: String,
    pub capabilities: Capabilities,
    pub usage_policy: UsagePolicyRef,
    pub skills: Vec<SkillDescriptor>,
}

impl AgentCard {
    /// Card for `doc` served from `base_url`. The document hash is
    /// recomputed, not copied from the document.
    pub fn build(
        name: &str,
        base_url: &str,
        doc: &PolicyDocument,
        skills: Vec<SkillDescriptor>,
        mode: AdherenceMode,
    ) -> Result<Self, CanonicalError> {
        let base = base_url.trim_end_matches('/');
        Ok(AgentCard {
            name: name.to_owned(),
            url: base.to_owned(),
            capabilities: Capabilities {
                extensions: vec![Extension {
                    uri: ACAP_EXTENSION_URI.into(),
                    description: format!(
                        "ACAP v{ACAP_VERSION}: versioned usage policy and consent auditing."
                    ),
                    required: true,
                    params: Some(ExtensionParams {
                        min_version: ACAP_VERSION.into(),
                        max_version: ACAP_VERSION.into(),
                    }),
                }],
            },
            usage_policy: UsagePolicyRef {
                version: doc.version.clone(),
                document_uri: format!("{base}{USAGE_POLICY_PATH}"),
                document_hash: compute_policy_hash(doc)?,
                effective_date: doc.effective_date.clone(),
                acceptance_required: true,
                acceptance_endpoint: format!("{base}{CONSENT_PATH}"),
                natural_language_uri: doc.natural_language_uri.clone(),
                adherence_mode: mode,
            },
            skills,
        })
    }

    pub fn skill(&self, name: &str) -> Option<&SkillDescriptor> {
        self.skills.iter().find(|s| s.name == name)
    }

    /// The consent extension entry, matched on the URI minus its version.
    pub fn acap_extension(&self) -> Option<&Extension> {
        let family = extension_family(ACAP_EXTENSION_URI);
        self.capabilities
            .extensions
            .iter()
            .find(|e| extension_family(&e.uri) == family)
    }

    /// Highest protocol version both sides support, if any.
    pub fn negotiate(&self) -> Option<String> {
        let ext = self.acap_extension()?;
        let (min, max) = match &ext.params {
            Some(p) => (p.min_version.as_str(), p.max_version.as_str()),
            None => {
                let v = ext.uri.rsplit('/').next()?.strip_prefix('v')?;
                (v, v)
            }
        };
        let ours = version_key(ACAP_VERSION)?;
        (version_key(min)? <= ours && ours <= version_key(max)?).then(|| ACAP_VERSION.to_owned())
    }

    /// Skills naming claims absent from `doc`, as (skill, claim) pairs.
    pub fn dangling_claims(&self, doc: &PolicyDocument) -> Vec<(String, String)> {
        self.skills
            .iter()
            .flat_map(|s| {
                s.policy_claims
                    .iter()
                    .filter(|c| doc.claim(c).is_none())
                    .map(|c| (s.name.clone(), c.clone()))
            })
            .collect()
    }
}

fn extension_family(uri: &str) -> &str {
    uri.rsplit_once('/').map_or(uri, |(family, _)| family)
}

fn version_key(v: &str) -> Option<Vec<u64>> {
    v.split('.').map(|p| p.parse().ok()).collect()
}
