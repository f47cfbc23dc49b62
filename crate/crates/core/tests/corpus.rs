mod common;

use std::collections::BTreeMap;

use wrapsec::engine::Termination;

const EXPECTED_UNSAFE: &[(&str, &[&str])] = &[
    ("bank", &["Account"]),
    ("countdown", &[]),
    ("counter", &[]),
    ("downgrade", &["Cleaner"]),
    ("election", &["Voter"]),
    ("future_chain", &["Consumer"]),
    ("health_care_classes", &["LabImpl", "Proxy"]),
    ("health_care_high", &["Lab", "Proxy"]),
    ("health_care_low", &["Lab", "Proxy"]),
    ("high_branch_call", &["Guard"]),
    ("high_future_read", &["Keeper"]),
    ("high_reply_low_caller", &["Thief", "Vault"]),
    ("implicit_flow", &["Holder"]),
    ("low_observer", &["Sender"]),
    ("multicast", &["Announcer"]),
    ("nested_branches", &["Mixer"]),
    ("ping_pong", &[]),
    ("pipeline", &[]),
    ("relay_chain", &[]),
    ("self_wait", &[]),
];

#[test]
fn at_least_twenty_programs_resolve() {
    let all = common::corpus();
    assert!(all.len() >= 20, "{} programs", all.len());
    for (name, src) in all {
        wrapsec::lang::load_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn classification_table() {
    let names: Vec<_> = common::corpus().into_iter().map(|(n, _)| n).collect();
    let listed: Vec<_> = EXPECTED_UNSAFE.iter().map(|(n, _)| n.to_string()).collect();
    assert_eq!(names, listed);
    for (name, want) in EXPECTED_UNSAFE {
        let e = common::engine(name);
        let got: Vec<_> = e
            .report
            .values()
            .filter(|v| v.is_unsafe())
            .map(|v| v.class.as_str())
            .collect();
        assert_eq!(&got, want, "{name}");
    }
}

#[test]
fn terminations_over_seeds() {
    for (name, _) in common::corpus() {
        let e = common::engine(&name);
        let mut seen = BTreeMap::new();
        for seed in 0..20 {
            let t = e
                .run_seeded(seed, 10_000)
                .unwrap_or_else(|err| panic!("{name} seed {seed}: {err}"));
            assert!(t.violations.is_empty(), "{name} seed {seed}: {:?}", t.violations);
            *seen.entry(t.termination).or_insert(0) += 1;
        }
        let want = if name == "self_wait" {
            Termination::Deadlock
        } else {
            Termination::Quiescent
        };
        assert_eq!(seen.keys().copied().collect::<Vec<_>>(), vec![want], "{name}");
    }
}

/// Seed-0 traces are checked against files under `tests/golden`.
/// Set `WRAPSEC_BLESS=1` to rewrite them.
#[test]
fn golden_traces() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("WRAPSEC_BLESS").is_some();
    for (name, _) in common::corpus() {
        let got = common::engine(&name).run_seeded(0, 10_000).unwrap().to_json_lines();
        let path = dir.join(format!("{name}.jsonl"));
        if bless {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(got == want, "{name}: trace differs from {}", path.display());
    }
}

#[test]
fn patient_level_decides_delivery() {
    let high = common::engine("health_care_high").run_seeded(1, 10_000).unwrap();
    let low = common::engine("health_care_low").run_seeded(1, 10_000).unwrap();
    let delivered = |t: &wrapsec::engine::Trace| {
        t.final_config
            .objects()
            .find(|o| o.class == "Patient")
            .map(|o| o.attrs["last"].clone())
            .unwrap()
    };
    assert_eq!(delivered(&high), wrapsec::TaggedValue::high(wrapsec::Value::Int(42)));
    assert_eq!(delivered(&low).value, wrapsec::Value::Int(0));
}
