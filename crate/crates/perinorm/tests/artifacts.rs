//! Interface suite: the artifacts the binary writes, their round-trip
//! fidelity, process-level determinism, and the exit-code contract.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use perinorm::report::{map_from_json, map_to_json, uncoupling_results};
use perinorm::uncouple::{run_uncoupling, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perinorm"))
}

fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn run_to(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary launches")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

/// The coefficient dump reproduces the in-memory objects bit for bit after
/// a serialize/parse/rebuild cycle through the reader half.
#[test]
fn results_round_trip_is_bit_exact() {
    let spec = fixture("uncouple_basic");
    let opts = RunOptions {
        delta: 0.05,
        ..RunOptions::default()
    };
    let run = run_uncoupling(&spec, &opts).expect("run");
    let text = uncoupling_results(&run).render().expect("render");
    let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    for (key, map) in [("phi", &run.phi), ("remainder", &run.remainder)] {
        let rebuilt = map_from_json(&value[key]).expect("rebuild");
        let gap = rebuilt.sub(map).expect("same shape").max_coeff();
        assert_eq!(gap, 0.0, "{key} must round-trip exactly");
        // The writer half must agree with itself on the rebuilt object.
        let again = map_to_json(&rebuilt).render().expect("render");
        let reference = map_to_json(map).render().expect("render");
        assert_eq!(again, reference, "{key} re-serialization must be stable");
    }
}

/// Two separate processes with the same options write byte-identical
/// artifacts; thread count must not leak into the files.
#[test]
fn processes_write_byte_identical_artifacts() {
    let base = tempfile::tempdir().expect("tempdir");
    let dir_a = base.path().join("a");
    let dir_b = base.path().join("b");
    let job = fixture_path("uncouple_basic");

    let out = run_to(&dir_a, &["uncouple", &job, "--delta", "0.05", "--seed", "3"]);
    assert!(out.status.success(), "first run: {out:?}");
    let out = run_to(&dir_b, &["uncouple", &job, "--delta", "0.05", "--seed", "3"]);
    assert!(out.status.success(), "second run: {out:?}");
    for name in ["report.json", "results.json"] {
        assert_eq!(
            read(&dir_a, name),
            read(&dir_b, name),
            "{name} differs between identical runs"
        );
    }

    let sweep_a = base.path().join("sa");
    let sweep_b = base.path().join("sb");
    let args = ["sweep", job.as_str(), "--delta-list", "0.1,0.05,0.025"];
    let out = bin()
        .args(args)
        .arg("--out")
        .arg(&sweep_a)
        .env("NF_THREADS", "1")
        .output()
        .expect("binary launches");
    assert!(out.status.success(), "serial sweep: {out:?}");
    let out = bin()
        .args(args)
        .arg("--out")
        .arg(&sweep_b)
        .env("NF_THREADS", "4")
        .output()
        .expect("binary launches");
    assert!(out.status.success(), "parallel sweep: {out:?}");
    for name in ["sweep.csv", "report.json"] {
        assert_eq!(
            read(&sweep_a, name),
            read(&sweep_b, name),
            "{name} depends on the thread count"
        );
    }
    let csv = read(&sweep_a, "sweep.csv");
    assert!(
        csv.starts_with(
            "delta,p,p_opt,certified_bound,sampled_sup,a_priori_bound,a_priori_applicable\n"
        ),
        "sweep header changed: {csv}"
    );
    assert_eq!(csv.lines().count(), 4, "one row per radius plus header");
}

/// report.json carries the documented top-level keys on each route.
#[test]
fn reports_carry_the_documented_schema() {
    let base = tempfile::tempdir().expect("tempdir");
    let job = fixture_path("uncouple_basic");
    let dir = base.path().join("u");
    let out = run_to(&dir, &["uncouple", &job, "--delta", "0.05"]);
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir, "report.json")).expect("valid json");
    for key in [
        "label", "route", "delta", "p", "p_opt", "scan", "constants", "bounds", "gevrey",
        "residuals",
    ] {
        assert!(report.get(key).is_some(), "report.json misses {key}");
    }
    assert_eq!(report["route"], "uncouple");
    assert_eq!(report["bounds"]["a_priori_applicable"], false);

    let hopf = fixture_path("hopf");
    let dir = base.path().join("n");
    let out = run_to(&dir, &["normalize", &hopf, "--p", "3"]);
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir, "report.json")).expect("valid json");
    assert_eq!(report["route"], "normalize");
    for key in ["resonant_tuples", "criteria", "bounds", "residuals"] {
        assert!(report.get(key).is_some(), "report.json misses {key}");
    }

    let dir = base.path().join("c");
    let out = run_to(&dir, &["constants", &job]);
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir, "report.json")).expect("valid json");
    assert!(report.get("constants").is_some());
}

/// Exit codes: 0 success, 1 usage/schema, 2 resonance rejection, 3
/// tolerance/blow-up, with the diagnostic on stderr and, for the scan, the
/// report still on disk.
#[test]
fn exit_codes_follow_the_contract() {
    let base = tempfile::tempdir().expect("tempdir");
    let job = fixture_path("uncouple_basic");

    let out = run_to(&base.path().join("ok"), &["check", &job]);
    assert_eq!(out.status.code(), Some(0), "clean check: {out:?}");

    let out = bin().arg("--help").output().expect("binary launches");
    assert_eq!(out.status.code(), Some(0), "help is not an error");

    let out = bin()
        .args(["uncouple", &job, "--no-such-flag"])
        .output()
        .expect("binary launches");
    assert_eq!(out.status.code(), Some(1), "unknown flag is a usage error");

    let bad = base.path().join("bad.json");
    fs::write(&bad, "{ not json").expect("write");
    let out = run_to(
        &base.path().join("b1"),
        &["uncouple", bad.to_str().expect("utf8 path")],
    );
    assert_eq!(out.status.code(), Some(1), "malformed job file: {out:?}");

    let unknown_field = base.path().join("unknown.json");
    let mut text = fs::read_to_string(&job).expect("read fixture");
    text = text.replacen("\"label\"", "\"labelled\"", 1);
    fs::write(&unknown_field, text).expect("write");
    let out = run_to(
        &base.path().join("b2"),
        &["uncouple", unknown_field.to_str().expect("utf8 path")],
    );
    assert_eq!(out.status.code(), Some(1), "unknown field: {out:?}");

    let resonant_dir = base.path().join("res");
    let out = run_to(&resonant_dir, &["check", &fixture_path("resonant")]);
    assert_eq!(out.status.code(), Some(2), "resonance rejection: {out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("non-resonance violation"),
        "diagnostic names the violation: {stderr}"
    );
    // The scan artifact lands before the rejection exit so the resonant
    // tuples can be inspected.
    let report: serde_json::Value =
        serde_json::from_str(&read(&resonant_dir, "report.json")).expect("valid json");
    assert!(
        report["scan"]["resonant"]
            .as_array()
            .is_some_and(|rows| !rows.is_empty()),
        "rejected scan lists its resonant tuples"
    );

    // A strongly self-amplifying first block blows up inside one period;
    // the independent verification must report that as a tolerance-class
    // failure, not succeed or crash.
    let blowup = base.path().join("blowup.json");
    fs::write(
        &blowup,
        r#"{
  "label": "blowup",
  "T": 6.283185307179586,
  "m0": 1,
  "m1": 1,
  "L0": {
    "matrix": [[0.5]],
    "eigvals": [[0.5, 0.0]],
    "eigvecs": [[[1.0, 0.0]]]
  },
  "L1": { "matrix": [[-1.0]], "nu": 1 },
  "V": [
    {
      "component": 0,
      "alpha": [2, 0],
      "modes": [ { "k": 0, "re": 50.0, "im": 0.0 } ]
    }
  ],
  "c": 100.0,
  "rho": 1.0,
  "ell": 1
}"#,
    )
    .expect("write");
    let out = run_to(
        &base.path().join("b3"),
        &[
            "verify",
            blowup.to_str().expect("utf8 path"),
            "--delta",
            "0.5",
            "--p",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "blow-up during verify: {out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("integration blow-up"),
        "diagnostic names the blow-up: {stderr}"
    );
}
