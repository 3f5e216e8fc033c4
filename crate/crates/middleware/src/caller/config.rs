use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use acap_core::policy::{ClaimParser, RuleBasedParser};
use acap_core::{CallerIntent, CapabilityManifest, ScalarMap, SigningKey, ValidUntil};

use crate::callee::ConfigError;

/// Everything the caller needs to consent and act.
#[derive(Clone)]
pub struct CallerConfig {
    /// Bound to the principal or organisation, not to the process.
    pub caller_agent_id: String,
    pub principal_id: String,
    pub capability_manifest: CapabilityManifest,
    pub intent: CallerIntent,
    pub parser: Arc<dyn ClaimParser>,
    pub signing_key: Option<SigningKey>,
    /// Expiry stamped on new records.
    pub valid_until: ValidUntil,
}

impl std::fmt::Debug for CallerConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CallerConfig")
            .field("caller_agent_id", &self.caller_agent_id)
            .field("principal_id", &self.principal_id)
            .field("intent", &self.intent)
            .field("signed", &self.signing_key.is_some())
            .finish_non_exhaustive()
    }
}

impl CallerConfig {
    pub fn new(
        caller_agent_id: impl Into<String>,
        principal_id: impl Into<String>,
        capability_manifest: CapabilityManifest,
        intent: CallerIntent,
    ) -> Self {
        CallerConfig {
            caller_agent_id: caller_agent_id.into(),
            principal_id: principal_id.into(),
            capability_manifest,
            intent,
            parser: Arc::new(RuleBasedParser),
            signing_key: None,
            valid_until: ValidUntil::OnAnyChange,
        }
    }

    pub fn with_parser(mut self, parser: Arc<dyn ClaimParser>) -> Self {
        self.parser = parser;
        self
    }

    pub fn with_signing_key(mut self, key: SigningKey) -> Self {
        self.signing_key = Some(key);
        self
    }
}

/// File form of [`CallerConfig`] plus the callee endpoint. Loaded from
/// TOML, then overridden by `ACAP_*` environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CallerSettings {
    pub caller_agent_id: String,
    pub principal_id: String,
    pub callee_url: String,
    /// Capability manifest (JSON); the demo manifest when absent.
    pub manifest_path: Option<PathBuf>,
    pub purpose_statement: String,
    pub declared_purposes: Vec<String>,
    pub declared_context: ScalarMap,
    /// Hex secret of the caller's ES256 key.
    pub signing_key: Option<String>,
    pub signing_kid: Option<String>,
}

impl Default for CallerSettings {
    fn default() -> Self {
        let demo = crate::demo::demo_caller_config();
        CallerSettings {
            caller_agent_id: demo.caller_agent_id,
            principal_id: demo.principal_id,
            callee_url: "http://127.0.0.1:8080".into(),
            manifest_path: None,
            purpose_statement: demo.intent.purpose_statement,
            declared_purposes: demo.intent.declared_purposes,
            declared_context: ScalarMap::new(),
            signing_key: None,
            signing_kid: None,
        }
    }
}

impl CallerSettings {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut settings = match path {
            Some(p) => crate::callee::read_toml(p)?,
            None => CallerSettings::default(),
        };
        settings.apply_env(|k| std::env::var(k).ok());
        Ok(settings)
    }

    /// Applies `ACAP_CALLEE_URL`, `ACAP_CALLER_ID`, `ACAP_PRINCIPAL_ID`,
    /// `ACAP_MANIFEST_PATH`, `ACAP_CALLER_KEY` and `ACAP_CALLER_KID`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        let fields: [(&str, &mut dyn FnMut(String)); 6] = [
            ("ACAP_CALLEE_URL", &mut |v| self.callee_url = v),
            ("ACAP_CALLER_ID", &mut |v| self.caller_agent_id = v),
            ("ACAP_PRINCIPAL_ID", &mut |v| self.principal_id = v),
            ("ACAP_MANIFEST_PATH", &mut |v| {
                self.manifest_path = Some(v.into())
            }),
            ("ACAP_CALLER_KEY", &mut |v| self.signing_key = Some(v)),
            ("ACAP_CALLER_KID", &mut |v| self.signing_kid = Some(v)),
        ];
        for (name, set) in fields {
            if let Some(v) = var(name) {
                set(v);
            }
        }
    }

    pub fn into_config(self) -> Result<CallerConfig, ConfigError> {
        let manifest = match &self.manifest_path {
            None => acap_core::fixtures::demo_manifest(),
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_slice(&bytes).map_err(|e| ConfigError::Parse {
                    path: path.clone(),
                    detail: e.to_string(),
                })?
            }
        };
        let intent = CallerIntent {
            purpose_statement: self.purpose_statement,
            declared_purposes: self.declared_purposes,
            declared_context: self.declared_context,
        };
        let mut config =
            CallerConfig::new(self.caller_agent_id, self.principal_id, manifest, intent);
        if let Some(hex) = &self.signing_key {
            let mut key = SigningKey::from_hex(hex).map_err(|e| ConfigError::Key(e.to_string()))?;
            if let Some(kid) = self.signing_kid {
                key = key.with_kid(kid);
            }
            config = config.with_signing_key(key);
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides() {
        let mut s = CallerSettings::default();
        s.apply_env(|k| (k == "ACAP_CALLEE_URL").then(|| "http://10.0.0.1:9".into()));
        assert_eq!(s.callee_url, "http://10.0.0.1:9");
        let config = s.into_config().unwrap();
        assert_eq!(config.caller_agent_id, acap_core::fixtures::DEMO_CALLER);
        assert!(config.signing_key.is_none());
    }

    #[test]
    fn file_settings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("caller.toml");
        std::fs::write(
            &path,
            "caller_agent_id = \"did:example:a\"\ndeclared_purposes = [\"behavioural_profiling\"]\n\
             [declared_context]\nretention_days = 90\n",
        )
        .unwrap();
        let s: CallerSettings = crate::callee::read_toml(&path).unwrap();
        let config = s.into_config().unwrap();
        assert_eq!(config.caller_agent_id, "did:example:a");
        assert_eq!(
            config.intent.declared_purposes,
            vec!["behavioural_profiling"]
        );
        assert_eq!(config.intent.declared_context["retention_days"], 90.into());
    }
}
