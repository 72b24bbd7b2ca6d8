//! Exit-code contract and negative controls for the binary: 0 when all
//! requested checks pass, 1 on check failures, 2 on usage/config errors.

use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (Option<i32>, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_smpsim"))
        .args(args)
        .output()
        .unwrap();
    (
        output.status.code(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn missing_config_file_exits_two() {
    let (code, err) = run(&["simulate", "--config", "/nonexistent/nope.json"]);
    assert_eq!(code, Some(2), "stderr: {err}");
}

#[test]
fn unknown_subcommand_exits_two() {
    let (code, _) = run(&["frobnicate"]);
    assert_eq!(code, Some(2));
}

#[test]
fn zero_horizon_rejected_with_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "zero.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
             "horizon": 0.0 }"#,
    );
    let (code, err) = run(&["simulate", "--config", &config]);
    assert_eq!(code, Some(2));
    assert!(err.contains("horizon"), "stderr: {err}");
}

#[test]
fn empty_suite_selection_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "empty.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
             "verify": { "suites": [] } }"#,
    );
    let (code, err) = run(&["verify", "--config", &config]);
    assert_eq!(code, Some(2));
    assert!(err.contains("suite"), "stderr: {err}");
}

#[test]
fn invalid_model_gate_and_override() {
    let tmp = tempfile::tempdir().unwrap();
    // a rate of zero everywhere never accumulates hazard, so validation gates it
    let body = r#"{ "model": { "states": 2, "kind": { "grid": { "entries": [
            { "from": 1, "to": 2, "classes": [ { "breaks": [0.0], "values": [0.0] } ] },
            { "from": 2, "to": 1, "classes": [ { "breaks": [0.0], "values": [1.0] } ] }
        ]}}},
        "horizon": 2.0 %OVERRIDE% }"#;
    let gated = write_config(tmp.path(), "gated.json", &body.replace("%OVERRIDE%", ""));
    let (code, err) = run(&["simulate", "--config", &gated]);
    assert_eq!(code, Some(2));
    assert!(err.contains("validation"), "stderr: {err}");

    let overridden = write_config(
        tmp.path(),
        "override.json",
        &body.replace("%OVERRIDE%", r#", "allow_invalid_model": true"#),
    );
    let out = tmp.path().join("out");
    let (code, err) = run(&[
        "simulate",
        "--config",
        &overridden,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0), "stderr: {err}");
    // no exit interval ever accepts a mark: the path never jumps
    let csv = fs::read_to_string(out.join("trajectory_0000.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["n,t,state", "0,0,1"]);
}

#[test]
fn corrupted_sup_norms_fail_verify_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    // declared sups are far below the true rates, so intervals overlap
    let config = write_config(
        tmp.path(),
        "corrupt.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } },
                        "sup_norms": [[0.0, 0.5], [0.5, 0.0]] },
             "allow_invalid_model": true,
             "verify": { "suites": ["layout"], "samples": 2000 } }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = run(&[
        "verify",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(1), "stderr: {err}");
    let verdicts = fs::read_to_string(out.join("verify_verdicts.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&verdicts).unwrap();
    assert_eq!(json["passed"], false);
    let failed: Vec<&str> = json["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v["pass"] == false)
        .map(|v| v["test"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().any(|t| t.starts_with("layout/")),
        "expected a layout failure, got {failed:?}"
    );
}

#[test]
fn verify_passes_on_healthy_grid_model() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "grid.json",
        r#"{ "model": { "states": 2, "kind": { "grid": { "entries": [
                { "from": 1, "to": 2, "classes": [
                    { "upto_n": 0, "breaks": [0.0, 0.5], "values": [0.5, 2.0] },
                    { "breaks": [0.0], "values": [1.0] } ] },
                { "from": 2, "to": 1, "classes": [ { "breaks": [0.0], "values": [3.0] } ] }
            ]}}},
             "seed": 5,
             "verify": { "suites": ["layout", "rates", "holding", "oracle"], "samples": 4000 } }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = run(&[
        "verify",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0), "stderr: {err}");
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "seeded.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
             "seed": 1, "horizon": 3.0 }"#,
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");
    for (out, seed) in [(&out_a, "9"), (&out_b, "9"), (&out_c, "10")] {
        let (code, _) = run(&[
            "simulate",
            "--config",
            &config,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, Some(0));
    }
    let read = |d: &Path| fs::read_to_string(d.join("trajectory_0000.csv")).unwrap();
    assert_eq!(read(&out_a), read(&out_b));
    assert_ne!(read(&out_a), read(&out_c));
}

#[test]
fn couple_summary_reports_identical_initials_as_merged_at_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "couple.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
             "seed": 8, "horizon": 5.0, "replications": 20,
             "couple": { "init1": { "state": 1 }, "init2": { "state": 1 },
                          "dynkin": { "enabled": false } } }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = run(&[
        "couple",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0), "stderr: {err}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("couple_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["meeting"]["merged_fraction"], 1.0);
    assert_eq!(summary["meeting"]["mean_merge_time"], 0.0);
    assert_eq!(summary["meeting"]["mean_meeting_time"], 0.0);
    let csv = fs::read_to_string(out.join("coupled_0000.csv")).unwrap();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1], "both", "lone move under identical initials: {line}");
        assert_eq!(fields[2], fields[3]);
    }
}

#[test]
fn oracle_sampler_writes_tagged_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "oracle.json",
        r#"{ "model": { "states": 2, "kind": { "catalog": { "name": "ctmc2" } } },
             "seed": 4, "horizon": 3.0, "replications": 2,
             "simulate": { "initial_state": 1, "sampler": "oracle" } }"#,
    );
    let out = tmp.path().join("out");
    let (code, err) = run(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0), "stderr: {err}");
    let csv = fs::read_to_string(out.join("trajectory_0001.csv")).unwrap();
    assert!(csv.contains("sampler=oracle"), "missing sampler tag: {csv}");
    let jumps = csv.lines().filter(|l| !l.starts_with('#')).count() - 2;
    assert!(jumps > 0, "oracle path produced no jumps");

    // rerun: byte-identical
    let out2 = tmp.path().join("out2");
    let (code, _) = run(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(
        fs::read(out.join("trajectory_0001.csv")).unwrap(),
        fs::read(out2.join("trajectory_0001.csv")).unwrap()
    );
}

#[test]
fn run_config_corpus_seeds_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/run_config");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let bytes = fs::read(&path).unwrap();
        smpsim_cli::run_config::RunConfig::from_json_bytes(&bytes)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 6);
}
