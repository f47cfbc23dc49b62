//! Sandboxed execution of a statement list in a high context.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::config::{Component, Configuration, FutureCmp, FutureStatus, Store, WrapperCmp, WrapperId};
use crate::engine::{Engine, Rule};
use crate::lang::{assigned_vars, load_program, ResolvedProgram, Stmt};
use crate::lattice::{Level, PcStack, TaggedValue};
use crate::value::{FutureId, Value};

const SANDBOX_SRC: &str = "
    interface PeerI { Int m(Int x); }
    class Peer implements PeerI { Int m(Int x) { return x } }
    class Sandbox implements PeerI { Int m(Int x) { return x } }";

/// Names bound in every sandbox run besides the caller's state.
pub const PEER_VAR: &str = "peer";
pub const LOW_FUTURE_VAR: &str = "g_low";
pub const HIGH_FUTURE_VAR: &str = "g_high";
pub const ERROR_FUTURE_VAR: &str = "g_err";

fn sandbox_program() -> Arc<ResolvedProgram> {
    static P: OnceLock<Arc<ResolvedProgram>> = OnceLock::new();
    P.get_or_init(|| Arc::new(load_program(SANDBOX_SRC).expect("sandbox program resolves")))
        .clone()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub clauses: Vec<Clause>,
    /// Set when the fragment could not be run to completion.
    pub error: Option<String>,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.error.is_none() && self.clauses.iter().all(|c| c.holds)
    }

    fn failed(why: String) -> Self {
        LemmaReport {
            clauses: Vec::new(),
            error: Some(why),
        }
    }
}

fn contains_endif(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::EndIf(_) => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => contains_endif(then_branch) || else_branch.as_deref().is_some_and(contains_endif),
        _ => false,
    })
}

fn future(c: &mut Configuration, id: &FutureId, status: FutureStatus, wrapped: bool) {
    let f = Component::Future(FutureCmp { id: id.clone(), status });
    c.components.push(if wrapped {
        Component::Wrapper(WrapperCmp {
            id: WrapperId::Future(id.clone()),
            level: Level::H,
            inner: vec![f],
        })
    } else {
        f
    });
}

/// Runs `body` from `(a, l)` under `pcs` in a flow-sensitive sandbox
/// object until it is idle, and checks the four high-context clauses:
/// the stack is unchanged, exactly the assigned variables are raised, the
/// state stays low-equivalent, and no low output is produced.
///
/// The sandbox adds `peer` (an idle object), and three futures: `g_low`
/// resolved low, `g_high` resolved and wrapped high, `g_err` failed.
pub fn check_high_context_lemma(body: &[Stmt], a: &Store, l: &Store, pcs: &PcStack) -> LemmaReport {
    if contains_endif(body) {
        return LemmaReport::failed("fragment contains an endif marker".to_string());
    }
    if pcs.is_empty() {
        return LemmaReport::failed("program-context stack is empty".to_string());
    }
    let engine = Engine::new(sandbox_program());
    let mut c = engine.boot();
    let peer = engine.create_object(&mut c, "Peer", Level::L);
    let me = engine.create_object(&mut c, "Sandbox", Level::L);
    let fid = |n: u32| FutureId::new(format!("{me}!{}", 1000 + n));
    future(
        &mut c,
        &fid(1),
        FutureStatus::Resolved(TaggedValue::low(Value::Int(3))),
        false,
    );
    future(
        &mut c,
        &fid(2),
        FutureStatus::Resolved(TaggedValue::high(Value::Int(4))),
        true,
    );
    future(&mut c, &fid(3), FutureStatus::Error, false);
    future(&mut c, &fid(0), FutureStatus::Unresolved, false);
    {
        let o = c.object_mut(&me).expect("sandbox object");
        o.attrs = a.clone();
        o.attrs
            .insert("this".to_string(), TaggedValue::low(Value::Object(me.clone())));
        o.locals = l.clone();
        let bind = |o: &mut crate::config::ObjectCmp, k: &str, v: Value| {
            o.locals.entry(k.to_string()).or_insert(TaggedValue::low(v));
        };
        bind(o, PEER_VAR, Value::Object(peer.clone()));
        bind(o, LOW_FUTURE_VAR, Value::Future(fid(1)));
        bind(o, HIGH_FUTURE_VAR, Value::Future(fid(2)));
        bind(o, ERROR_FUTURE_VAR, Value::Future(fid(3)));
        bind(o, "label", Value::Future(fid(0)));
        o.stmts = body.to_vec();
        o.pcs = Some(pcs.clone());
    }
    let pre = c.object(&me).unwrap().clone();
    let mut post = None;
    let mut events = Vec::new();
    for step in 0..100_000 {
        let o = c.object(&me).unwrap();
        if o.stmts.is_empty() {
            break;
        }
        if post.is_none() && matches!(o.stmts.first(), Some(Stmt::Return(_))) {
            post = Some(o.clone());
        }
        let mine: Vec<_> = engine
            .enabled_steps(&c)
            .into_iter()
            .filter(|ch| ch.object.as_ref() == Some(&me) && ch.rule != Rule::Start)
            .collect();
        let Some(ch) = mine.first() else {
            return LemmaReport::failed(format!("sandbox blocked at step {step}"));
        };
        match engine.apply(&mut c, ch, step) {
            Ok(ev) => events.extend(ev),
            Err(e) => return LemmaReport::failed(format!("step {step}: {e}")),
        }
    }
    let post = match post {
        Some(p) => p,
        None => c.object(&me).unwrap().clone(),
    };

    let mut clauses = Vec::new();
    let depth = |p: &Option<PcStack>| p.as_ref().map_or(0, PcStack::depth);
    clauses.push(Clause {
        name: "stack preserved".to_string(),
        holds: depth(&pre.pcs) == depth(&post.pcs),
        detail: format!("depth {} before, {} after", depth(&pre.pcs), depth(&post.pcs)),
    });

    let assigned = assigned_vars(body);
    let mut bad = Vec::new();
    let scopes = [(&pre.attrs, &post.attrs), (&pre.locals, &post.locals)];
    for (before, after) in scopes {
        for (k, v0) in before {
            let Some(v1) = after.get(k) else {
                bad.push(format!("`{k}` disappeared"));
                continue;
            };
            let shadowed = std::ptr::eq(before, &pre.attrs) && pre.locals.contains_key(k);
            if assigned.contains(k) && !shadowed {
                if v1.level != Level::H {
                    bad.push(format!("`{k}` assigned but left at {}", v1.level));
                }
            } else if v1 != v0 {
                bad.push(format!("`{k}` changed from {v0} to {v1}"));
            }
        }
    }
    clauses.push(Clause {
        name: "assigned variables raised".to_string(),
        holds: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} assigned", assigned.len())
        } else {
            bad.join("; ")
        },
    });

    let low0 = super::equiv::low_part(&pre.attrs, &pre.locals);
    let low1 = super::equiv::low_part(&post.attrs, &post.locals);
    let agree = low1.iter().all(|(k, v)| low0.get(k) == Some(v));
    clauses.push(Clause {
        name: "low equivalent".to_string(),
        holds: agree,
        detail: format!("{} low bindings before, {} after", low0.len(), low1.len()),
    });

    let low_out: Vec<_> = events.iter().filter(|e| e.is_low_output()).collect();
    clauses.push(Clause {
        name: "no low output".to_string(),
        holds: low_out.is_empty(),
        detail: format!(
            "{} outputs, {} low",
            events.iter().filter(|e| e.is_output()).count(),
            low_out.len()
        ),
    });
    LemmaReport { clauses, error: None }
}
