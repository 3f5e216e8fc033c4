use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use acap_core::{ChainStore, PolicyDocument, SigningKey, VerifyingKey};

use super::{CalleeService, ServiceError};
use crate::card::{AdherenceMode, SkillDescriptor};
use crate::demo;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("{var}: {detail}")]
    Env { var: &'static str, detail: String },
    #[error("invalid key: {0}")]
    Key(String),
    #[error("journal: {0}")]
    Store(#[from] acap_core::chain::StoreError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

/// Callee settings. Loaded from a TOML file, then overridden by `ACAP_*`
/// environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalleeConfig {
    pub listen: String,
    /// Base URL advertised in the card; defaults to `http://<listen>`.
    pub public_url: Option<String>,
    pub name: String,
    /// Policy document (JSON). Without one the demo policy and skills are
    /// served.
    pub policy_path: Option<PathBuf>,
    /// Skills and their governing claims; only used with `policy_path`.
    pub skills: Vec<SkillDescriptor>,
    pub adherence_mode: AdherenceMode,
    /// Chain journal directory; in-memory when absent.
    pub journal_dir: Option<PathBuf>,
    /// Hex secret of the callee's ES256 key.
    pub signing_key: Option<String>,
    pub signing_kid: Option<String>,
    /// Caller verification keys by JWS kid (hex SEC1 points).
    pub caller_keys: BTreeMap<String, String>,
}

impl Default for CalleeConfig {
    fn default() -> Self {
        CalleeConfig {
            listen: "127.0.0.1:8080".into(),
            public_url: None,
            name: "acap-callee".into(),
            policy_path: None,
            skills: Vec::new(),
            adherence_mode: AdherenceMode::Local,
            journal_dir: None,
            signing_key: None,
            signing_kid: None,
            caller_keys: BTreeMap::new(),
        }
    }
}

pub(crate) fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_owned(),
        detail: e.to_string(),
    })
}

impl CalleeConfig {
    /// Defaults, then `path` if given, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => read_toml(p)?,
            None => CalleeConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    /// Applies `ACAP_LISTEN`, `ACAP_PUBLIC_URL`, `ACAP_POLICY_PATH`,
    /// `ACAP_ADHERENCE_MODE`, `ACAP_JOURNAL_DIR`, `ACAP_SIGNING_KEY` and
    /// `ACAP_SIGNING_KID` as looked up by `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("ACAP_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("ACAP_PUBLIC_URL") {
            self.public_url = Some(v);
        }
        if let Some(v) = var("ACAP_POLICY_PATH") {
            self.policy_path = Some(v.into());
        }
        if let Some(v) = var("ACAP_ADHERENCE_MODE") {
            self.adherence_mode = v.parse().map_err(|detail| ConfigError::Env {
                var: "ACAP_ADHERENCE_MODE",
                detail,
            })?;
        }
        if let Some(v) = var("ACAP_JOURNAL_DIR") {
            self.journal_dir = Some(v.into());
        }
        if let Some(v) = var("ACAP_SIGNING_KEY") {
            self.signing_key = Some(v);
        }
        if let Some(v) = var("ACAP_SIGNING_KID") {
            self.signing_kid = Some(v);
        }
        Ok(())
    }

    pub fn base_url(&self) -> String {
        self.public_url
            .clone()
            .unwrap_or_else(|| format!("http://{}", self.listen))
    }

    /// Builds the service and publishes its policy.
    pub fn build_service(&self, base_url: &str) -> Result<CalleeService, ConfigError> {
        let store = match &self.journal_dir {
            Some(dir) => ChainStore::open(dir)?,
            None => ChainStore::new(),
        };
        let (doc, mut builder) = match &self.policy_path {
            None => {
                let doc = acap_core::fixtures::demo_policy();
                (doc, demo::demo_builder(base_url))
            }
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                let doc: PolicyDocument =
                    serde_json::from_slice(&bytes).map_err(|e| ConfigError::Parse {
                        path: path.clone(),
                        detail: e.to_string(),
                    })?;
                let mut builder = CalleeService::builder(doc.publisher.clone(), base_url);
                for skill in &self.skills {
                    builder = builder.skill(skill.clone(), demo::echo_handler(&skill.name));
                }
                (doc, builder)
            }
        };
        builder = builder
            .name(self.name.clone())
            .adherence_mode(self.adherence_mode)
            .store(Arc::new(store));
        if let Some(hex) = &self.signing_key {
            let mut key = SigningKey::from_hex(hex).map_err(|e| ConfigError::Key(e.to_string()))?;
            if let Some(kid) = &self.signing_kid {
                key = key.with_kid(kid.clone());
            }
            builder = builder.signing_key(key);
        }
        for (kid, hex) in &self.caller_keys {
            let key = VerifyingKey::from_hex(hex).map_err(|e| ConfigError::Key(e.to_string()))?;
            builder = builder.caller_key(kid.clone(), key);
        }
        let service = builder.build();
        service.publish(doc)?;
        Ok(service)
    }
}
