mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wrapsec::analysis::{abstract_exec, AbsEnv};
use wrapsec::config::Component;
use wrapsec::engine::Engine;
use wrapsec::lang::{load_program, parse_program, parse_stmts, pretty_program, pretty_stmts, BinOp, Expr, Stmt};
use wrapsec::{Level, ObjectId, TaggedValue, Value};

const VARS: [&str; 5] = ["x", "y", "h", "z", "u"];

fn level(rng: &mut impl Rng) -> Level {
    if rng.gen() {
        Level::H
    } else {
        Level::L
    }
}

fn env_of(levels: &[Level]) -> AbsEnv {
    VARS.iter().zip(levels).map(|(k, l)| (k.to_string(), *l)).collect()
}

fn small_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.5) {
        return if rng.gen() {
            Expr::var(*VARS.choose(rng).unwrap())
        } else {
            Expr::int(rng.gen_range(0..4))
        };
    }
    let op = *[BinOp::Add, BinOp::Sub].choose(rng).unwrap();
    Expr::bin(op, small_expr(rng, depth - 1), small_expr(rng, depth - 1))
}

fn small_cond(rng: &mut impl Rng) -> Expr {
    let op = *[BinOp::Lt, BinOp::Eq].choose(rng).unwrap();
    Expr::bin(op, small_expr(rng, 1), small_expr(rng, 1))
}

/// Assignments and conditionals over `VARS` only.
fn local_body(rng: &mut impl Rng, depth: usize) -> Vec<Stmt> {
    (0..rng.gen_range(1..=4))
        .map(|_| {
            if depth > 0 && rng.gen_bool(0.3) {
                Stmt::If {
                    cond: small_cond(rng),
                    then_branch: local_body(rng, depth - 1),
                    else_branch: rng.gen_bool(0.5).then(|| local_body(rng, depth - 1)),
                }
            } else {
                Stmt::Assign {
                    target: VARS.choose(rng).unwrap().to_string(),
                    value: small_expr(rng, 2),
                }
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn statements_survive_printing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = common::fragments::body(&mut rng);
        let text = pretty_stmts(&body);
        let back = parse_stmts(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, body);
    }

    #[test]
    fn abstract_exec_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = local_body(&mut rng, 2);
        let lo: Vec<Level> = VARS.iter().map(|_| level(&mut rng)).collect();
        let hi: Vec<Level> = lo.iter().map(|l| if rng.gen() { Level::H } else { *l }).collect();
        for (pc_lo, pc_hi) in [(Level::L, Level::L), (Level::L, Level::H), (Level::H, Level::H)] {
            let a = abstract_exec(&body, &env_of(&lo), pc_lo);
            let b = abstract_exec(&body, &env_of(&hi), pc_hi);
            for (k, v) in &a {
                prop_assert!(v.leq(b[k]), "{} at {:?} vs {:?}", k, v, b[k]);
            }
        }
    }

    #[test]
    fn abstract_exec_covers_runtime_levels(seed in any::<u64>(), sched in 0u64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = local_body(&mut rng, 2);
        let declared: Vec<Level> = VARS.iter().map(|_| level(&mut rng)).collect();
        let fields: String = VARS
            .iter()
            .zip(&declared)
            .map(|(v, l)| format!("Int{} {v}; ", if l.is_high() { "_H" } else { "" }))
            .collect();
        let src = format!(
            "interface I {{ Void go(); Int_H peek(); }} \
             class C implements I {{ {fields} Int_H secret; Void go() {{ {} }} Int_H peek() {{ return secret }} }} \
             main {{ I c = new C(); !c.go() }}",
            pretty_stmts(&body)
        );
        let p = Arc::new(load_program(&src).map_err(|e| TestCaseError::fail(format!("{src}: {e}")))?);
        let c1 = ObjectId::new("C#1");
        let inputs = VARS
            .iter()
            .zip(&declared)
            .map(|(v, l)| ((c1.clone(), v.to_string()), TaggedValue::new(Value::Int(rng.gen_range(0..3)), *l)))
            .collect();
        let e = Engine::new(p).with_inputs(inputs);
        prop_assert!(e.is_unsafe("C"));
        let t = e.run_seeded(sched, 10_000).map_err(|err| TestCaseError::fail(err.to_string()))?;
        let o = t.final_config.object(&c1).unwrap();
        let bound = abstract_exec(&body, &env_of(&declared), Level::L);
        for v in VARS {
            prop_assert!(o.attrs[v].level.leq(bound[v]), "{} is {} at runtime but {:?} statically", v, o.attrs[v], bound[v]);
        }
    }

    #[test]
    fn shuffles_keep_canonical_form(seed in any::<u64>(), steps in 0usize..60, which in 0usize..20) {
        let all = common::corpus();
        let (name, _) = &all[which % all.len()];
        let e = common::engine(name);
        let t = e.run_seeded(seed, steps).unwrap();
        let mut c = t.final_config.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for comp in c.components.iter_mut() {
            match comp {
                Component::Queue(q) => q.msgs.shuffle(&mut rng),
                Component::Wrapper(w) => w.inner.shuffle(&mut rng),
                _ => {}
            }
        }
        c.components.shuffle(&mut rng);
        prop_assert_eq!(c.canonical(), t.final_config.canonical());
        let (l, r) = c.components.split_at(c.components.len() / 2);
        let mut left = c.clone();
        left.components = l.to_vec();
        let mut right = c.clone();
        right.components = r.to_vec();
        prop_assert_eq!(left.compose(&right).canonical(), right.compose(&left).canonical());
        let mut once = c.clone();
        once.normalize();
        let mut twice = once.clone();
        twice.normalize();
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn corpus_programs_survive_printing() {
    for (name, src) in common::corpus() {
        let p = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = pretty_program(&p);
        let back = parse_program(&text).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{text}"));
        assert_eq!(back, p, "{name}");
    }
}
