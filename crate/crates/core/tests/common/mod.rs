#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use wrapsec::engine::Engine;
use wrapsec::lang::{load_program, ResolvedProgram};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every corpus program as (file stem, source), sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sob"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(format!("{name}.sob"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn program(name: &str) -> Arc<ResolvedProgram> {
    Arc::new(load_program(&source(name)).unwrap_or_else(|e| panic!("{name}: {e}")))
}

pub fn engine(name: &str) -> Engine {
    Engine::new(program(name))
}

pub mod fragments {
    //! Random endif-free statement lists over a fixed sandbox vocabulary.

    use rand::seq::SliceRandom;
    use rand::Rng;
    use wrapsec::config::Store;
    use wrapsec::lang::{BinOp, Expr, Stmt};
    use wrapsec::{Level, TaggedValue, Value};

    const INTS: &[&str] = &["x", "y", "h", "z", "u"];
    const FUTURES: &[&str] = &["g_low", "g_high", "g_err"];

    fn expr(rng: &mut impl Rng, depth: usize) -> Expr {
        if depth == 0 || rng.gen_bool(0.4) {
            return if rng.gen_bool(0.6) {
                Expr::var(*INTS.choose(rng).unwrap())
            } else {
                Expr::int(rng.gen_range(-5..=5))
            };
        }
        let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul].choose(rng).unwrap();
        Expr::bin(op, expr(rng, depth - 1), expr(rng, depth - 1))
    }

    fn cond(rng: &mut impl Rng) -> Expr {
        match rng.gen_range(0..4) {
            0 => Expr::Lit(Value::Bool(rng.gen())),
            1 => Expr::bin(BinOp::Eq, expr(rng, 1), expr(rng, 1)),
            _ => Expr::bin(BinOp::Lt, expr(rng, 1), expr(rng, 1)),
        }
    }

    fn stmt(rng: &mut impl Rng, depth: usize) -> Stmt {
        let peer_call = |rng: &mut _| (Expr::var("peer"), "m".to_string(), vec![expr(rng, 1)]);
        match rng.gen_range(0..10) {
            0..=3 => Stmt::Assign {
                target: INTS.choose(rng).unwrap().to_string(),
                value: expr(rng, 2),
            },
            4 | 5 if depth > 0 => Stmt::If {
                cond: cond(rng),
                then_branch: stmts(rng, depth - 1),
                else_branch: rng.gen_bool(0.5).then(|| stmts(rng, depth - 1)),
            },
            6 => {
                let (callee, method, args) = peer_call(rng);
                Stmt::Call { callee, method, args }
            }
            7 => {
                let (callee, method, args) = peer_call(rng);
                Stmt::FutCall {
                    future: "q".to_string(),
                    callee,
                    method,
                    args,
                }
            }
            8 => Stmt::Get {
                future: FUTURES.choose(rng).unwrap().to_string(),
                target: "r".to_string(),
            },
            _ => Stmt::New {
                target: "w".to_string(),
                level: None,
                class: "Peer".to_string(),
                args: Vec::new(),
            },
        }
    }

    fn stmts(rng: &mut impl Rng, depth: usize) -> Vec<Stmt> {
        (0..rng.gen_range(1..=4)).map(|_| stmt(rng, depth)).collect()
    }

    /// A body of up to six statements, possibly ending in a return.
    pub fn body(rng: &mut impl Rng) -> Vec<Stmt> {
        let mut out: Vec<_> = (0..rng.gen_range(1..=6)).map(|_| stmt(rng, 2)).collect();
        if rng.gen_bool(0.3) {
            out.push(Stmt::Return(expr(rng, 1)));
        }
        out
    }

    /// Attributes `x`, `y` low and `h` high, locals `z`, `u`, `r`, `q`, `w`.
    pub fn state(rng: &mut impl Rng) -> (Store, Store) {
        let mut int = |lv| TaggedValue::new(Value::Int(rng.gen_range(-3..=3)), lv);
        let a: Store = [("x", int(Level::L)), ("y", int(Level::L)), ("h", int(Level::H))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let mut l: Store = [("z", int(Level::L)), ("u", int(Level::L))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        for k in ["r", "q", "w"] {
            l.insert(k.to_string(), TaggedValue::low(Value::Null));
        }
        (a, l)
    }
}
