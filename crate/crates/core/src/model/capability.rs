use serde::{Deserialize, Serialize};

use super::scalar::ScalarMap;

/// Fingerprint input describing the reasoning entity behind a caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityManifest {
    pub model_identifier: String,
    pub tool_manifest: Vec<String>,
    /// System prompt digest, temperature, retrieval and chain-of-thought
    /// flags, and anything else that shapes how claims are interpreted.
    #[serde(default)]
    pub reasoning_configuration: ScalarMap,
    #[serde(default)]
    pub caller_capability_hash: String,
}

impl CapabilityManifest {
    pub fn new(model_identifier: impl Into<String>, tools: Vec<String>) -> Self {
        CapabilityManifest {
            model_identifier: model_identifier.into(),
            tool_manifest: tools,
            reasoning_configuration: ScalarMap::new(),
            caller_capability_hash: String::new(),
        }
    }

    pub fn with_setting(mut self, key: impl Into<String>, value: impl Into<super::Scalar>) -> Self {
        self.reasoning_configuration
            .insert(key.into(), value.into());
        self
    }

    pub fn seal(mut self) -> Result<Self, crate::canonical::CanonicalError> {
        self.caller_capability_hash = crate::hash::compute_capability_hash(&self)?;
        Ok(self)
    }
}
