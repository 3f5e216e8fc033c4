use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use sha2::{Digest, Sha256};

use acap_core::fixtures;
use acap_core::PolicyDocument;

fn acap(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_acap"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf-8 output"),
    )
}

fn acap_json(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let (code, stdout) = acap(&all);
    let value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (code, value)
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn codes(report: &Value) -> Vec<String> {
    report["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["report"]["violations"].as_array().unwrap())
        .map(|v| v["code"].as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn hash_is_stable_key_order_free_and_matches_an_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixtures::demo_policy();
    let path = write_json(dir.path(), "policy.json", &doc);
    let (code, first) = acap(&["hash", &path]);
    assert_eq!(code, 0);
    assert_eq!(acap(&["hash", &path]).1, first);

    let value: serde_json::Map<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let reversed: serde_json::Map<String, Value> = value.into_iter().rev().collect();
    let reordered = write_json(dir.path(), "reordered.json", &reversed);
    assert_eq!(acap(&["hash", &reordered]).1, first);

    let mut blank = doc.clone();
    blank.hash = String::new();
    let digest: String = Sha256::digest(serde_jcs::to_vec(&blank).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(first.trim(), format!("sha256:{digest}"));

    let (_, json) = acap_json(&["hash", &path]);
    assert_eq!(json["kind"], "policy_document");
    assert_eq!(json["stored_hash_matches"], true);
}

#[test]
fn hash_detects_manifests_and_rejects_other_documents() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_json(dir.path(), "manifest.json", &fixtures::demo_manifest());
    let (code, json) = acap_json(&["hash", &manifest]);
    assert_eq!(code, 0);
    assert_eq!(json["kind"], "capability_manifest");
    assert_eq!(
        json["hash"],
        acap_core::compute_capability_hash(&fixtures::demo_manifest()).unwrap()
    );

    let other = write_json(dir.path(), "other.json", &serde_json::json!({"x": 1}));
    assert_eq!(acap(&["hash", &other]).0, 1);
    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    assert_eq!(
        acap(&["hash", dir.path().join("broken.json").to_str().unwrap()]).0,
        1
    );
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixtures::demo_policy();
    let policy = write_json(dir.path(), "policy.json", &doc);
    let records = fixtures::consent_chain(3, &doc);
    let events = fixtures::adherence_trail(5, &records[2].id);
    let chain = write_json(dir.path(), "chain.json", &records);
    let trail = write_json(dir.path(), "trail.json", &events);

    let (code, report) = acap_json(&["validate", &chain, "--trail", &trail, "--policy", &policy]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(report["valid"], true);

    // one byte of the middle record changed
    let text = std::fs::read_to_string(&chain).unwrap();
    let target = format!("\"{}\"", records[1].id);
    let tampered_text = text.replacen(&target, &target.replace("0002", "0009"), 1);
    assert_ne!(tampered_text, text);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, tampered_text).unwrap();
    let (code, report) = acap_json(&["validate", tampered.to_str().unwrap(), "--policy", &policy]);
    assert_eq!(code, 1);
    assert!(
        codes(&report).contains(&"broken_link".to_owned()),
        "{report}"
    );

    let mut incomplete = records.clone();
    incomplete[0].parsed_claims.pop();
    let incomplete = write_json(dir.path(), "incomplete.json", &incomplete);
    let (code, report) = acap_json(&["validate", &incomplete, "--policy", &policy]);
    assert_eq!(code, 1);
    assert!(codes(&report).contains(&"incomplete_parsed_claims".to_owned()));

    let (code, text) = acap(&["validate", &incomplete, "--policy", &policy]);
    assert_eq!(code, 1);
    assert!(text.contains("[incomplete_parsed_claims]"), "{text}");

    std::fs::write(dir.path().join("broken.json"), "[{").unwrap();
    assert_eq!(
        acap(&["validate", dir.path().join("broken.json").to_str().unwrap()]).0,
        2
    );
    assert_eq!(acap(&["validate", &chain, "--key", "no-equals-sign"]).0, 2);
}

#[test]
fn diff_partitions_claims() {
    let dir = tempfile::tempdir().unwrap();
    let (v1, v2) = (fixtures::demo_policy(), fixtures::demo_policy_v2());
    let p1 = write_json(dir.path(), "v1.json", &v1);
    let p2 = write_json(dir.path(), "v2.json", &v2);

    let (code, same) = acap_json(&["diff", &p1, &p1]);
    assert_eq!(code, 0);
    assert_eq!(same["added"], serde_json::json!([]));
    assert_eq!(same["removed"], serde_json::json!([]));

    let (code, diff) = acap_json(&["diff", &p1, &p2]);
    assert_eq!(code, 0);
    let ids = |d: &PolicyDocument| {
        d.claims
            .iter()
            .map(|c| c.id.clone())
            .collect::<BTreeSet<_>>()
    };
    let set = |v: &Value| {
        v.as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_owned())
            .collect::<BTreeSet<_>>()
    };
    let old = semver::Version::parse(&v1.version).unwrap();
    let newer: BTreeSet<_> = v2
        .claims
        .iter()
        .filter(|c| semver::Version::parse(&c.since_version).unwrap() > old)
        .map(|c| c.id.clone())
        .collect();
    let added: BTreeSet<_> = ids(&v2)
        .difference(&ids(&v1))
        .cloned()
        .chain(newer.iter().cloned())
        .collect();
    let removed: BTreeSet<_> = ids(&v1).difference(&ids(&v2)).cloned().collect();
    let retained: BTreeSet<_> = ids(&v2).difference(&added).cloned().collect();
    assert_eq!(set(&diff["added"]), added);
    assert_eq!(set(&diff["removed"]), removed);
    assert_eq!(set(&diff["retained"]), retained);

    let (code, err) = acap_json(&["diff", &p2, &p1]);
    assert_eq!(code, 1);
    assert!(
        err["error"].as_str().unwrap().contains("does not follow"),
        "{err}"
    );
}

#[test]
fn explore_exit_codes() {
    let (code, report) = acap_json(&[
        "explore",
        "--max-versions",
        "1",
        "--max-adherence",
        "1",
        "--max-cap",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["clean"], true);

    let (code, report) = acap_json(&["explore", "--inject", "permit-on-disputed"]);
    assert_eq!(code, 1);
    let violations = report["violations"].as_array().unwrap();
    let s6 = violations
        .iter()
        .find(|v| v["property"] == "S6")
        .expect("S6 violated");
    assert!(!s6["trace"].as_array().unwrap().is_empty());

    let (code, text) = acap(&["explore", "--governance", "--order", "dfs"]);
    assert_eq!(code, 0);
    assert!(text.contains("violations: none"));
    assert_eq!(acap(&["explore", "--max-versions", "0"]).0, 2);
}

#[test]
fn bench_rows_are_ordered() {
    let (code, report) = acap_json(&[
        "bench",
        "--operation",
        "validate_adherence_trail",
        "--sizes",
        "10,20",
        "--samples",
        "200",
    ]);
    assert_eq!(code, 0);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row["samples"], 200);
        assert!(row["median_ns"].as_u64() <= row["p99_ns"].as_u64());
        assert!(row["median_us"].is_u64());
    }
    assert_eq!(acap(&["bench", "--samples", "10"]).0, 2);
}

#[test]
fn demo_audit_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let audit = dir.path().join("audit.json");
    let policy = dir.path().join("policy.json");
    let (code, report) = acap_json(&[
        "demo",
        "--audit-out",
        audit.to_str().unwrap(),
        "--policy-out",
        policy.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{report}");
    assert_eq!(report["passed"], true);
    assert_eq!(report["consent"]["decision"], "accepted");
    assert_eq!(report["calls"][0]["event"]["decision"], "deny");
    assert_eq!(report["calls"][0]["skill_ran"], false);
    assert_eq!(report["calls"][1]["event"]["decision"], "permit");

    let (code, check) = acap_json(&[
        "validate",
        audit.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{check}");

    let (code, text) = acap(&["demo", "--adherence-mode", "delegated"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("skill not invoked"));
}
