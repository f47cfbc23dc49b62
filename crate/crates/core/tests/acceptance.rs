//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wrapsec::analysis::{abstract_exec, classify_class, method_exit_env, AbsEnv, Verdict};
use wrapsec::config::{Component, Configuration, FutureStatus};
use wrapsec::engine::{Engine, Faults, Payload, Scheduler, Trace};
use wrapsec::lang::parse_stmts;
use wrapsec::ni::{
    check_high_context_lemma, engine_pair, ni_check_exhaustive, ni_check_lockstep, replay_witness, HighInputSpec,
    NiResult, NiWitness,
};
use wrapsec::{Level, ObjectId, PcStack, TaggedValue, Value};

const C1_LIMIT: Duration = Duration::from_secs(1);
const C4_LIMIT: Duration = Duration::from_secs(10);
const C4_SEEDS: u64 = 100;
const C5_SEEDS: u64 = 100;
const C6_FRAGMENTS: usize = 1000;
const C7_PROGRAMS: usize = 20;
const C8_SEEDS: u64 = 10;
const C9_LIMIT: Duration = Duration::from_secs(60);
const C9_STATE_BOUND: usize = 100_000;
const C10_SEEDS: u64 = 5;
const MAX_STEPS: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn env(pairs: &[(&str, Level)]) -> AbsEnv {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn c1_classification() -> Outcome {
    let started = Instant::now();
    for (name, lab) in [("health_care_classes", "LabImpl"), ("health_care_high", "Lab")] {
        let e = common::engine(name);
        let r = &e.report;
        let verdict = |c: &str| r.get(c).map(|v| v.verdict).ok_or(format!("{name}: no class {c}"));
        ensure(verdict("Proxy")? == Verdict::Unsafe, || {
            format!("{name}: Proxy not unsafe")
        })?;
        ensure(verdict(lab)? == Verdict::Unsafe, || format!("{name}: {lab} not unsafe"))?;
        ensure(verdict("Service")? == Verdict::Safe, || {
            format!("{name}: Service not safe")
        })?;
        let has = |c: &str, at: &str, why: &str| {
            r[c].witnesses
                .iter()
                .any(|w| w.location.contains(at) && w.reason.contains(why))
        };
        ensure(has("Proxy", "signal(r)", "high actual parameter"), || {
            format!("{name}: Proxy witnesses {:?}", r["Proxy"].witnesses)
        })?;
        ensure(has(lab, "detectResult", "high return value"), || {
            format!("{name}: {lab} witnesses {:?}", r[lab].witnesses)
        })?;
    }
    let took = started.elapsed();
    ensure(took < C1_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("Proxy and lab unsafe, Service safe, in {took:?}"))
}

fn c2_implicit_flow() -> Outcome {
    let s = parse_stmts("if h th l1 := 1 el l2 := 0 fi").map_err(|e| e.to_string())?;
    let got = abstract_exec(
        &s,
        &env(&[("h", Level::H), ("l1", Level::L), ("l2", Level::L)]),
        Level::L,
    );
    let want = env(&[("h", Level::H), ("l1", Level::H), ("l2", Level::H)]);
    ensure(got == want, || format!("got {got:?}"))?;
    Ok(format!("{got:?}"))
}

fn c3_downgrade() -> Outcome {
    let p = common::program("downgrade");
    let class = p.class("Cleaner").ok_or("no Cleaner")?;
    let m = &class.methods["clean"];
    let exit = method_exit_env(class, m);
    ensure(exit["h"] == Level::L && exit["l"] == Level::L, || {
        format!("exit env {exit:?}")
    })?;
    let v = classify_class(class);
    let about_clean: Vec<_> = v.witnesses.iter().filter(|w| w.location.contains("clean")).collect();
    ensure(about_clean.is_empty(), || format!("clean flagged: {about_clean:?}"))?;
    let e = Engine::new(p.clone());
    ensure(e.is_unsafe("Cleaner"), || {
        "Cleaner should run flow-sensitively".to_string()
    })?;
    let t = e.run_seeded(0, MAX_STEPS).map_err(|e| e.to_string())?;
    let ret = t
        .events()
        .find_map(|ev| match &ev.payload {
            Payload::Completion { msg } if ev.object.as_ref().is_some_and(|o| o.class_name() == "Cleaner") => {
                Some((ev.tag, msg.clone()))
            }
            _ => None,
        })
        .ok_or("no completion from Cleaner")?;
    ensure(
        ret.0 == Level::L && ret.1.value == TaggedValue::low(Value::Int(0)),
        || format!("returned {ret:?}"),
    )?;
    let main = t.final_config.object(&ObjectId::new("Main#1")).ok_or("no main")?;
    ensure(main.attrs["r"] == TaggedValue::low(Value::Int(0)), || {
        format!("main read {}", main.attrs["r"])
    })?;
    Ok("static exit level L; dynamic return 0 tagged L".to_string())
}

fn deliveries_to<'t>(t: &'t Trace, dest: &'t str) -> impl Iterator<Item = &'t wrapsec::config::InvocMsg> + 't {
    t.events().filter_map(move |ev| match &ev.payload {
        Payload::Delivered { msg, .. } if msg.dest.as_str() == dest => Some(msg),
        _ => None,
    })
}

fn c4_wrapper_blocking() -> Outcome {
    let started = Instant::now();
    let low = common::engine("health_care_low");
    let high = common::engine("health_care_high");
    let patient = "Patient#1";
    for seed in 0..C4_SEEDS {
        let t = low
            .run_seeded(seed, MAX_STEPS)
            .map_err(|e| format!("low seed {seed}: {e}"))?;
        let leaked = deliveries_to(&t, patient).filter(|m| m.tag == Level::H).count();
        ensure(leaked == 0, || format!("low seed {seed}: {leaked} high deliveries"))?;
        let denied: Vec<_> = t
            .events()
            .filter_map(|ev| match &ev.payload {
                Payload::Denied { msg } if msg.dest.as_str() == patient && msg.method == "signal" => {
                    Some(msg.fid.clone())
                }
                _ => None,
            })
            .collect();
        ensure(!denied.is_empty(), || format!("low seed {seed}: no denied signal"))?;
        for f in &denied {
            let status = t.final_config.future(f).map(|x| x.0.status.clone());
            ensure(status == Some(FutureStatus::Error), || {
                format!("low seed {seed}: {f} is {status:?}")
            })?;
        }

        let t = high
            .run_seeded(seed, MAX_STEPS)
            .map_err(|e| format!("high seed {seed}: {e}"))?;
        let got = deliveries_to(&t, patient)
            .filter(|m| m.method == "signal")
            .any(|m| m.actuals.first() == Some(&TaggedValue::high(Value::Int(42))));
        ensure(got, || format!("high seed {seed}: patient never received 42_H"))?;
    }
    let took = started.elapsed();
    ensure(took < C4_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{C4_SEEDS} seeds each way in {took:?}"))
}

fn c5_monitors() -> Outcome {
    let mut runs = 0;
    for (name, _) in common::corpus() {
        let e = common::engine(&name);
        for seed in 0..C5_SEEDS {
            let t = e
                .run_seeded(seed, MAX_STEPS)
                .map_err(|e| format!("{name} seed {seed}: {e}"))?;
            ensure(t.violations.is_empty(), || {
                format!("{name} seed {seed}: {:?}", t.violations)
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, no violations"))
}

fn c6_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e3a);
    for i in 0..C6_FRAGMENTS {
        let body = common::fragments::body(&mut rng);
        let (a, l) = common::fragments::state(&mut rng);
        let pcs = PcStack::high(rand::Rng::gen_range(&mut rng, 1..=3));
        let r = check_high_context_lemma(&body, &a, &l, &pcs);
        if let Some(e) = &r.error {
            return Err(format!(
                "fragment {i} did not run: {e}: {}",
                wrapsec::lang::pretty_stmts(&body)
            ));
        }
        if let Some(c) = r.clauses.iter().find(|c| !c.holds) {
            return Err(format!(
                "fragment {i}: {} fails ({}): {}",
                c.name,
                c.detail,
                wrapsec::lang::pretty_stmts(&body)
            ));
        }
    }
    Ok(format!("{C6_FRAGMENTS} fragments, all four clauses hold"))
}

fn c7_replay() -> Outcome {
    let all = common::corpus();
    ensure(all.len() >= C7_PROGRAMS, || format!("only {} programs", all.len()))?;
    for (i, (name, _)) in all.iter().take(C7_PROGRAMS).enumerate() {
        let e = common::engine(name);
        let t = e
            .run_seeded(i as u64 + 11, MAX_STEPS)
            .map_err(|e| format!("{name}: {e}"))?;
        let again = e
            .run(e.boot(), &mut Scheduler::scripted(t.choices()), MAX_STEPS)
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(again.final_config == t.final_config, || {
            format!("{name}: final configurations differ")
        })?;
        ensure(again.steps == t.steps, || format!("{name}: steps differ"))?;
        ensure(again.final_config.dump() == t.final_config.dump(), || {
            format!("{name}: dumps differ")
        })?;
    }
    Ok(format!("{C7_PROGRAMS} programs replayed identically"))
}

fn pair(name: &str, spec: &str, faults: Faults) -> Result<[Engine; 2], String> {
    let p = common::program(name);
    let s = HighInputSpec::from_json(spec).map_err(|e| e.to_string())?;
    s.validate(&p).map_err(|e| format!("{name}: {e}"))?;
    Ok(engine_pair(&p, &s, faults))
}

fn c8_lockstep() -> Outcome {
    let spec = r#"{"program": "health_care_high.sob", "high": [{"Lab#1.result": 42}, {"Lab#1.result": 7}]}"#;
    let [a, b] = pair("health_care_high", spec, Faults::default())?;
    for seed in 0..C8_SEEDS {
        let v = ni_check_lockstep([&a, &b], &mut Scheduler::seeded(seed), MAX_STEPS).map_err(|e| e.to_string())?;
        ensure(v.result == NiResult::Pass, || format!("seed {seed}: {}", v.detail))?;
        let [x, y] = v.observations.ok_or("no observations")?;
        ensure(x == y, || format!("seed {seed}: observation maps differ"))?;
    }
    let mutations = [
        (
            "implicit_flow",
            r#"{"program": "implicit_flow.sob", "high": [{"Holder#1.h": false}, {"Holder#1.h": true}]}"#,
            Faults {
                disable_update_h: true,
                ..Faults::default()
            },
        ),
        (
            "low_observer",
            r#"{"program": "low_observer.sob", "high": [{"Sender#1.secret": 1}, {"Sender#1.secret": 2}]}"#,
            Faults {
                disable_w_invc: true,
                ..Faults::default()
            },
        ),
        (
            "high_future_read",
            r#"{"program": "high_future_read.sob", "high": [{"Keeper#1.secret": 1}, {"Keeper#1.secret": 2}]}"#,
            Faults {
                disable_w_fut: true,
                ..Faults::default()
            },
        ),
    ];
    for (name, spec, faults) in mutations {
        let [a, b] = pair(name, spec, Faults::default())?;
        for seed in 0..C8_SEEDS {
            let v = ni_check_lockstep([&a, &b], &mut Scheduler::seeded(seed), MAX_STEPS).map_err(|e| e.to_string())?;
            ensure(v.result == NiResult::Pass, || {
                format!("{name} hardened, seed {seed}: {}", v.detail)
            })?;
        }
        let [a, b] = pair(name, spec, faults)?;
        for seed in 0..C8_SEEDS {
            let v = ni_check_lockstep([&a, &b], &mut Scheduler::seeded(seed), MAX_STEPS).map_err(|e| e.to_string())?;
            ensure(v.result == NiResult::Fail, || {
                format!("{name} mutated, seed {seed}: {}", v.detail)
            })?;
            let w = v.witness.ok_or("fail without witness")?;
            let text = serde_json::to_string(&w).map_err(|e| e.to_string())?;
            let back: NiWitness = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let again = replay_witness([&a, &b], &back).map_err(|e| format!("{name}: replay: {e}"))?;
            ensure(again.result == NiResult::Fail, || {
                format!("{name}: replay gives {:?}", again.result)
            })?;
            ensure(again.witness.as_ref().map(|x| &x.reason) == Some(&w.reason), || {
                format!("{name}: replay reason differs")
            })?;
            for (run, e) in [(&w.run1, &a), (&w.run2, &b)] {
                e.replay(run.clone(), MAX_STEPS)
                    .map_err(|e| format!("{name}: single-run replay: {e}"))?;
            }
        }
    }
    Ok(format!(
        "health-care pair passes over {C8_SEEDS} seeds; 3 mutations fail with replayable witnesses"
    ))
}

fn c9_exhaustive() -> Outcome {
    let started = Instant::now();
    let spec = r#"{"program": "ping_pong.sob", "high": [{"Ponger#1.secret": 1}, {"Ponger#1.secret": 2}]}"#;
    let [a, b] = pair("ping_pong", spec, Faults::default())?;
    let v = ni_check_exhaustive([&a, &b], C9_STATE_BOUND, MAX_STEPS).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    ensure(v.result == NiResult::Pass, || format!("{:?}: {}", v.result, v.detail))?;
    ensure(took < C9_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{} in {took:?}", v.detail))
}

fn shuffled(c: &Configuration, rng: &mut ChaCha8Rng) -> Configuration {
    let mut c = c.clone();
    for comp in c.components.iter_mut() {
        match comp {
            Component::Queue(q) => q.msgs.shuffle(rng),
            Component::Wrapper(w) => w.inner.shuffle(rng),
            _ => {}
        }
    }
    c.components.shuffle(rng);
    c
}

fn c10_hygiene() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0usize;
    for (name, _) in common::corpus() {
        let e = common::engine(&name);
        for seed in 0..C10_SEEDS {
            let t = e.run_seeded(seed, MAX_STEPS).map_err(|e| format!("{name}: {e}"))?;
            let mut c = e.boot();
            c.normalize();
            let mut resolved: BTreeMap<_, FutureStatus> = BTreeMap::new();
            let mut wrappers = c.wrapper_ids();
            for (i, s) in t.steps.iter().enumerate() {
                e.apply(&mut c, &s.choice, i).map_err(|e| format!("{name}: {e}"))?;
                let other = shuffled(&c, &mut rng);
                ensure(other.canonical() == c.canonical(), || {
                    format!("{name} step {i}: shuffle changed canonical form")
                })?;
                let mut once = c.clone();
                once.normalize();
                let mut twice = once.clone();
                twice.normalize();
                ensure(once == twice, || format!("{name} step {i}: normalize not idempotent"))?;
                ensure(c.is_normal(), || format!("{name} step {i}: not normal after a step"))?;
                for comp in c.all() {
                    if let Component::Future(f) = comp {
                        if let Some(prev) = resolved.get(&f.id) {
                            ensure(prev == &f.status, || format!("{name} step {i}: {} rewritten", f.id))?;
                        } else if f.status != FutureStatus::Unresolved {
                            resolved.insert(f.id.clone(), f.status.clone());
                        }
                    }
                }
                let now = c.wrapper_ids();
                ensure(wrappers.iter().all(|w| now.contains(w)), || {
                    format!("{name} step {i}: wrapper removed")
                })?;
                wrappers = now;
                checked += 1;
            }
            ensure(t.violations.is_empty(), || format!("{name}: {:?}", t.violations))?;
        }
    }
    Ok(format!("{checked} configurations checked"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 classification of the health-care classes", c1_classification),
        ("2 implicit-flow environment", c2_implicit_flow),
        ("3 downgrade accepted statically and dynamically", c3_downgrade),
        ("4 wrapper blocking end to end", c4_wrapper_blocking),
        ("5 no monitor violations over the corpus", c5_monitors),
        ("6 high-context lemma on random fragments", c6_lemma),
        ("7 scripted replay determinism", c7_replay),
        ("8 lockstep non-interference and mutations", c8_lockstep),
        ("9 exhaustive non-interference", c9_exhaustive),
        ("10 multiset and rewrite hygiene", c10_hygiene),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{:?}]", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
