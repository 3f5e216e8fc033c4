use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// An ISO 8601 UTC timestamp carried as its exact textual form.
///
/// Records are signed over their canonical JSON, so the text is preserved
/// verbatim rather than round-tripped through a parsed representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(String);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn from_datetime(at: DateTime<Utc>) -> Self {
        Timestamp(at.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn new(text: impl Into<String>) -> Self {
        Timestamp(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses the text; only UTC with a `Z` suffix is accepted.
    pub fn parse(&self) -> Option<DateTime<Utc>> {
        if !self.0.ends_with('Z') {
            return None;
        }
        DateTime::parse_from_rfc3339(&self.0)
            .ok()
            .map(|t| t.with_timezone(&Utc))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<DateTime<Utc>> for Timestamp {
    fn from(at: DateTime<Utc>) -> Self {
        Self::from_datetime(at)
    }
}
