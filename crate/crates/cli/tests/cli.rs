use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name)
}

fn wrapsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrapsec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reports_verdicts() {
    let src = corpus("health_care_classes.sob");
    let o = wrapsec(&["analyze", path(&src)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for line in ["LabImpl: Unsafe", "Proxy: Unsafe", "Service: Safe"] {
        assert!(text.lines().any(|l| l == line), "{line} missing from\n{text}");
    }
    let o = wrapsec(&["analyze", "--format", "json", path(&src)]);
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let proxy = rows.iter().find(|r| r["class"] == "Proxy").unwrap();
    assert_eq!(proxy["verdict"], "Unsafe");
    assert!(!proxy["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_empty_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.sob");
    std::fs::write(&empty, "").unwrap();
    let o = wrapsec(&["analyze", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "");
    let bad = dir.path().join("bad.sob");
    std::fs::write(&bad, "class {").unwrap();
    let o = wrapsec(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn parse_prints_a_reparsable_program() {
    let dir = tempfile::tempdir().unwrap();
    let o = wrapsec(&["parse", path(&corpus("health_care_high.sob"))]);
    assert_eq!(code(&o), 0);
    let again = dir.path().join("again.sob");
    std::fs::write(&again, stdout(&o)).unwrap();
    let o2 = wrapsec(&["parse", again.to_str().unwrap()]);
    assert_eq!(stdout(&o2), stdout(&o));
}

#[test]
fn run_exit_codes_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = wrapsec(&[
        "run",
        "--seed",
        "1",
        "--trace",
        trace.to_str().unwrap(),
        path(&corpus("health_care_high.sob")),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.contains("\"method\":\"signal\"") && text.contains("\"dest\":\"Patient#1\""));

    let replayed = dir.path().join("r.jsonl");
    let o = wrapsec(&[
        "run",
        "--replay",
        trace.to_str().unwrap(),
        "--trace",
        replayed.to_str().unwrap(),
        path(&corpus("health_care_high.sob")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&replayed).unwrap(), text);

    let low = dir.path().join("low.jsonl");
    let o = wrapsec(&[
        "run",
        "--trace",
        low.to_str().unwrap(),
        path(&corpus("health_care_low.sob")),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&low).unwrap();
    assert!(text.contains("\"type\":\"denied\"") && text.contains("\"error\""));

    assert_eq!(code(&wrapsec(&["run", path(&corpus("self_wait.sob"))])), 3);
    assert_eq!(
        code(&wrapsec(&["run", "--max-steps", "3", path(&corpus("countdown.sob"))])),
        4
    );
}

#[test]
fn faults_need_test_mode() {
    let src = corpus("low_observer.sob");
    assert_eq!(code(&wrapsec(&["--disable-w-invc", "run", path(&src)])), 2);
    let o = wrapsec(&["--test-mode", "--disable-w-invc", "run", path(&src)]);
    assert_eq!(code(&o), 5, "{}", stdout(&o));
}

#[test]
fn ni_check_verdicts() {
    let o = wrapsec(&[
        "ni-check",
        "--mode",
        "lockstep",
        "--spec",
        path(&corpus("health_care_high.ni.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let wit = dir.path().join("w");
    let o = wrapsec(&[
        "--test-mode",
        "--disable-w-invc",
        "ni-check",
        "--spec",
        path(&corpus("low_observer.ni.json")),
        "--witness-dir",
        wit.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 6);
    let w: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(wit.join("witness.json")).unwrap()).unwrap();
    assert!(w["reason"].as_str().unwrap().contains("differs"));
    let o = wrapsec(&[
        "--test-mode",
        "--disable-w-invc",
        "run",
        "--replay",
        wit.join("run1.trace.jsonl").to_str().unwrap(),
        path(&corpus("low_observer.sob")),
    ]);
    assert_eq!(code(&o), 5);

    let spec = dir.path().join("empty.json");
    let program = corpus("ping_pong.sob");
    std::fs::write(&spec, serde_json::json!({ "program": program }).to_string()).unwrap();
    assert_eq!(code(&wrapsec(&["ni-check", "--spec", spec.to_str().unwrap()])), 0);

    assert_eq!(
        code(&wrapsec(&[
            "ni-check",
            "--mode",
            "exhaustive",
            "--state-bound",
            "5",
            "--spec",
            path(&corpus("ping_pong.ni.json"))
        ])),
        7
    );

    std::fs::write(&spec, r#"{"program": "x.sob", "high": [{}]}"#).unwrap();
    assert_eq!(code(&wrapsec(&["ni-check", "--spec", spec.to_str().unwrap()])), 2);
}

#[test]
fn explore_counts_states() {
    let o = wrapsec(&["explore", path(&corpus("ping_pong.sob"))]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("states: "));
    assert_eq!(
        code(&wrapsec(&[
            "explore",
            "--state-bound",
            "2",
            path(&corpus("ping_pong.sob"))
        ])),
        7
    );
}
