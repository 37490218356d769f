//! End-to-end checks of the installed binary: exit codes, file layout,
//! determinism and archive reuse.

use std::path::Path;
use std::process::{Command, Output};

const SERIES: [&str; 8] = [
    "probabilities.csv",
    "lambda_min.csv",
    "gbar_pairwise.csv",
    "gbar_averaged.csv",
    "trace_distance.csv",
    "measures.csv",
    "fidelity.csv",
    "flagged.csv",
];

fn chanmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = SERIES
        .iter()
        .map(|name| (name.to_string(), std::fs::read(dir.join(name)).expect(name)))
        .collect();
    files.push(("archive.json".into(), std::fs::read(dir.join("archive.json")).unwrap()));
    files
}

#[test]
fn ideal_case_a_writes_every_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = chanmix(&["ideal", "--scenario", "caseA", "--out", out.to_str().unwrap()]);
    assert_code(&result, 0);

    for name in SERIES {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    assert!(out.join("archive.json").is_file());

    let probs = std::fs::read_to_string(out.join("probabilities.csv")).unwrap();
    let mut lines = probs.lines();
    assert_eq!(lines.next(), Some("t,p_total"));
    assert_eq!(lines.next(), Some("0.0,1.0"));

    // no singular starts in this scenario
    let flagged = std::fs::read_to_string(out.join("flagged.csv")).unwrap();
    assert_eq!(flagged, "member,t_start,t_end,reason\n");

    // ideal mode leaves the fidelity table empty
    let fidelity = std::fs::read_to_string(out.join("fidelity.csv")).unwrap();
    assert_eq!(fidelity, "member,t,mean,min,n_replicas,n_converged\n");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("conf.json");
    std::fs::write(&config, r#"{"scenario": "caseA", "shotz": 3}"#).unwrap();
    let result = chanmix(&["simulate", "--config", config.to_str().unwrap()]);
    assert_code(&result, 2);
    assert!(stderr_of(&result).contains("shotz"));
}

#[test]
fn missing_scenario_exits_2() {
    let result = chanmix(&["ideal"]);
    assert_code(&result, 2);
    assert!(stderr_of(&result).contains("scenario required"));
}

#[test]
fn bad_scenario_exits_2() {
    let result = chanmix(&["ideal", "--scenario", "caseC"]);
    assert_code(&result, 2);
    assert!(stderr_of(&result).contains("caseC"));
}

#[test]
fn simulate_repeats_and_analysis_reproduce_every_byte() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let reanalyzed = dir.path().join("reanalyzed");

    let base = ["simulate", "--scenario", "caseA", "--seed", "5", "--shots", "200", "--replicas", "2", "--out"];
    let mut args = base.to_vec();
    args.push(first.to_str().unwrap());
    assert_code(&chanmix(&args), 0);
    let mut args = base.to_vec();
    args.push(second.to_str().unwrap());
    assert_code(&chanmix(&args), 0);

    assert_eq!(read_all(&first), read_all(&second), "same seed must give identical outputs");

    let archive = first.join("archive.json");
    let result = chanmix(&["analyze", archive.to_str().unwrap(), "--out", reanalyzed.to_str().unwrap()]);
    assert_code(&result, 0);
    for name in SERIES {
        let inline = std::fs::read(first.join(name)).unwrap();
        let redone = std::fs::read(reanalyzed.join(name)).unwrap();
        assert_eq!(inline, redone, "{name} differs between inline and archive analysis");
    }
}

#[test]
fn tampered_version_exits_4_naming_versions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_code(&chanmix(&["ideal", "--scenario", "caseB", "--out", out.to_str().unwrap()]), 0);

    let archive = out.join("archive.json");
    let text = std::fs::read_to_string(&archive)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 7");
    std::fs::write(&archive, text).unwrap();

    let result = chanmix(&["analyze", archive.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_code(&result, 4);
    let msg = stderr_of(&result);
    assert!(msg.contains("expected 1") && msg.contains("found 7"), "{msg}");
}

#[test]
fn missing_cell_exits_4_naming_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_code(&chanmix(&["ideal", "--scenario", "caseA", "--out", out.to_str().unwrap()]), 0);

    let archive = out.join("archive.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&archive).unwrap()).unwrap();
    let cells = doc["cells"].as_array_mut().unwrap();
    cells.retain(|c| !(c["member"] == "ch2" && c["time_index"] == 3));
    std::fs::write(&archive, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let result = chanmix(&["analyze", archive.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_code(&result, 4);
    let msg = stderr_of(&result);
    assert!(msg.contains("ch2") && msg.contains("time index 3"), "{msg}");
}

#[test]
fn env_var_supplies_the_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let result = Command::new(env!("CARGO_BIN_EXE_chanmix"))
        .args(["ideal", "--scenario", "caseA"])
        .env("CHANMIX_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_code(&result, 0);
    assert!(out.join("archive.json").is_file());
}
