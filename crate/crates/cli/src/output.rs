use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

/// What a subcommand produced. `code` is 0 exactly when the outcome is
/// clean.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub code: u8,
    pub text: String,
    pub json: Value,
}

impl Output {
    pub fn new(clean: bool, text: String, json: Value) -> Self {
        Output {
            code: if clean { 0 } else { 1 },
            text,
            json,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.code == 0
    }

    /// The rendering selected by `--json`.
    pub fn render(&self, json: bool) -> String {
        if json {
            serde_json::to_string_pretty(&self.json).expect("JSON values serialize")
        } else {
            self.text.clone()
        }
    }
}

/// A subcommand that could not produce an outcome. Input errors (unreadable
/// or unparseable files, bad flags) exit 2 unless a command says otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn json(&self) -> Value {
        serde_json::json!({ "error": self.message, "code": self.code })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Reads and parses a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("reading {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::input(format!("parsing {}: {e}", path.display())))
}
