use std::collections::HashSet;

use semver::Version;
use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::model::PolicyDocument;

/// Claim-level difference between two policy versions. The three lists
/// partition the union of both versions' claim ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub retained: Vec<String>,
}

impl PolicyDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Added: new ids, or ids whose `since_version` postdates the old version.
/// Removed: retired ids. Retained: everything else in the new document.
/// Lists follow document order.
pub fn diff_policies(
    old: &PolicyDocument,
    new: &PolicyDocument,
) -> Result<PolicyDiff, PolicyError> {
    let parse = |v: &str| {
        Version::parse(v).map_err(|e| PolicyError::InvalidVersion(v.to_owned(), e.to_string()))
    };
    let old_version = parse(&old.version)?;
    let new_version = parse(&new.version)?;
    if old_version >= new_version {
        return Err(PolicyError::VersionOrder {
            old: old.version.clone(),
            new: new.version.clone(),
        });
    }

    let old_ids: HashSet<&str> = old.claim_ids().collect();
    let new_ids: HashSet<&str> = new.claim_ids().collect();
    let mut diff = PolicyDiff::default();
    for claim in &new.claims {
        let introduced_later = Version::parse(&claim.since_version)
            .map(|since| since > old_version)
            .unwrap_or(true);
        if !old_ids.contains(claim.id.as_str()) || introduced_later {
            diff.added.push(claim.id.clone());
        } else {
            diff.retained.push(claim.id.clone());
        }
    }
    diff.removed = old
        .claim_ids()
        .filter(|id| !new_ids.contains(id))
        .map(str::to_owned)
        .collect();
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identical_claim_sets() {
        let old = fixtures::demo_policy();
        let mut new = old.clone();
        new.version = "2.1.1".into();
        let diff = diff_policies(&old, &new).unwrap();
        assert!(diff.added.is_empty() && diff.removed.is_empty());
        assert_eq!(diff.retained.len(), 3);
    }

    #[test]
    fn since_version_marks_added() {
        let old = fixtures::demo_policy();
        let mut new = old.clone();
        new.version = "3.0.0".into();
        new.claims[1].since_version = "3.0.0".into();
        let diff = diff_policies(&old, &new).unwrap();
        assert_eq!(diff.added, vec![new.claims[1].id.clone()]);
    }

    #[test]
    fn reversed_order_is_an_error() {
        let old = fixtures::demo_policy();
        let new = fixtures::demo_policy_v2();
        assert!(matches!(
            diff_policies(&new, &old),
            Err(PolicyError::VersionOrder { .. })
        ));
        assert!(diff_policies(&old, &old).is_err());
    }
}
