//! Class-wise flow-sensitive level analysis deciding which classes are safe.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::{assigned_vars, pretty_stmt, Expr, ResolvedClass, ResolvedMethod, ResolvedProgram, Stmt};
use crate::lattice::Level;

/// Abstract environment: variable to level.
pub type AbsEnv = BTreeMap<String, Level>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Witness {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub class: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}

impl ClassVerdict {
    pub fn is_unsafe(&self) -> bool {
        self.verdict == Verdict::Unsafe
    }
}

pub type Report = BTreeMap<String, ClassVerdict>;

/// Level of an expression: join of the variables it reads. Identities,
/// `this` and literals are `L`.
pub fn expr_level(e: &Expr, env: &AbsEnv) -> Level {
    match e {
        Expr::Tagged(t) => t.level,
        _ => {
            let mut vs = Vec::new();
            e.vars(&mut vs);
            crate::lattice::join_all(vs.iter().map(|v| env.get(v).copied().unwrap_or(Level::L)))
        }
    }
}

fn join_env(a: &AbsEnv, b: &AbsEnv) -> AbsEnv {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert(Level::L);
        *e = e.join(*v);
    }
    out
}

struct Analyzer<'a> {
    /// Future variables whose value provably comes from a call in this body.
    links: BTreeMap<String, Level>,
    /// Fields declared `L` and not shadowed in the method.
    low_fields: BTreeSet<String>,
    location: String,
    witnesses: Option<&'a mut Vec<Witness>>,
}

impl Analyzer<'_> {
    fn witness(&mut self, s: &Stmt, reason: String) {
        if let Some(w) = self.witnesses.as_deref_mut() {
            let wit = Witness {
                location: format!("{}: {}", self.location, pretty_stmt(s)),
                reason,
            };
            if !w.contains(&wit) {
                w.push(wit);
            }
        }
    }

    fn check_actuals(&mut self, s: &Stmt, args: &[Expr], env: &AbsEnv, pc: Level) {
        for (i, a) in args.iter().enumerate() {
            if expr_level(a, env).is_high() {
                let txt = crate::lang::pretty_expr(a);
                self.witness(s, format!("high actual parameter #{} `{txt}`", i + 1));
            }
        }
        if pc.is_high() {
            self.witness(s, "call in a high context".to_string());
        }
    }

    fn check_field(&mut self, s: &Stmt, target: &str, lv: Level) {
        if lv.is_high() && self.low_fields.contains(target) {
            self.witness(s, format!("high value stored in low field `{target}`"));
        }
    }

    fn exec(&mut self, stmts: &[Stmt], env: &AbsEnv, pc: Level) -> AbsEnv {
        let mut env = env.clone();
        for s in stmts {
            match s {
                Stmt::Assign { target, value } => {
                    let lv = expr_level(value, &env).join(pc);
                    self.check_field(s, target, lv);
                    env.insert(target.clone(), lv);
                }
                Stmt::New { target, args, .. } => {
                    self.check_actuals(s, args, &env, pc);
                    self.check_field(s, target, pc);
                    env.insert(target.clone(), pc);
                }
                Stmt::Call { args, .. } => self.check_actuals(s, args, &env, pc),
                Stmt::FutCall { future, args, .. } => {
                    self.check_actuals(s, args, &env, pc);
                    self.check_field(s, future, pc);
                    env.insert(future.clone(), pc);
                }
                Stmt::Get { future, target } => {
                    let lv = self.links.get(future).copied().unwrap_or(Level::H).join(pc);
                    self.check_field(s, target, lv);
                    env.insert(target.clone(), lv);
                }
                Stmt::Return(e) => {
                    if expr_level(e, &env).is_high() {
                        self.witness(s, format!("high return value `{}`", crate::lang::pretty_expr(e)));
                    } else if pc.is_high() {
                        self.witness(s, "return in a high context".to_string());
                    }
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    let empty = Vec::new();
                    let els = else_branch.as_ref().unwrap_or(&empty);
                    let guard = expr_level(cond, &env);
                    if guard.is_high() || pc.is_high() {
                        let t = self.exec(then_branch, &env, Level::H);
                        let e = self.exec(els, &env, Level::H);
                        let mut joined = join_env(&t, &e);
                        let mut targets = assigned_vars(then_branch);
                        targets.extend(assigned_vars(els));
                        for x in targets {
                            self.check_field(s, &x, Level::H);
                            joined.insert(x, Level::H);
                        }
                        env = joined;
                    } else {
                        let t = self.exec(then_branch, &env, Level::L);
                        let e = self.exec(els, &env, Level::L);
                        env = join_env(&t, &e);
                    }
                }
                Stmt::EndIf(sl) => {
                    for x in assigned_vars(sl) {
                        env.insert(x, Level::H);
                    }
                }
            }
        }
        env
    }
}

/// Flow-sensitive transfer of `stmts` from `env` under context `pc`.
/// Future reads are treated as high, since no call-site link is known.
pub fn abstract_exec(stmts: &[Stmt], env: &AbsEnv, pc: Level) -> AbsEnv {
    Analyzer {
        links: BTreeMap::new(),
        low_fields: BTreeSet::new(),
        location: String::new(),
        witnesses: None,
    }
    .exec(stmts, env, pc)
}

/// The declared-level environment a method body starts from.
pub fn initial_env(class: &ResolvedClass, m: &ResolvedMethod) -> AbsEnv {
    let mut env = AbsEnv::new();
    for v in class.attr_template() {
        env.insert(v.name.clone(), v.level);
    }
    for f in &m.formals {
        env.insert(f.name.clone(), f.level);
    }
    for l in &m.locals {
        env.insert(l.name.clone(), Level::L);
    }
    env.insert("this".to_string(), Level::L);
    env.insert("label".to_string(), Level::L);
    env
}

/// Variables of `m` written only by future calls, mapped to the join of the
/// callees' declared return levels. Locals qualify, and so do fields that
/// no other method of the class writes.
fn future_links(class: &ResolvedClass, m: &ResolvedMethod) -> BTreeMap<String, Level> {
    fn walk(stmts: &[Stmt], m: &ResolvedMethod, links: &mut BTreeMap<String, Option<Level>>) {
        for s in stmts {
            match s {
                Stmt::FutCall {
                    future, callee, method, ..
                } => {
                    let key = match callee {
                        Expr::This => "this".to_string(),
                        Expr::Var(v) => v.clone(),
                        _ => String::new(),
                    };
                    let lv = m.calls.get(&(key, method.clone())).map(|c| c.return_level);
                    let e = links.entry(future.clone()).or_insert(Some(Level::L));
                    *e = match (*e, lv) {
                        (Some(a), Some(b)) => Some(a.join(b)),
                        _ => None,
                    };
                }
                Stmt::Assign { target, .. } | Stmt::New { target, .. } | Stmt::Get { target, .. } => {
                    links.insert(target.clone(), None);
                }
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, m, links);
                    if let Some(b) = else_branch {
                        walk(b, m, links);
                    }
                }
                Stmt::EndIf(sl) => walk(sl, m, links),
                Stmt::Return(_) | Stmt::Call { .. } => {}
            }
        }
    }
    let mut links = BTreeMap::new();
    walk(&m.body, m, &mut links);
    let own = |k: &String| {
        if m.formals.iter().any(|f| &f.name == k) {
            return false;
        }
        if m.locals.iter().any(|l| &l.name == k) {
            return true;
        }
        class.fields.iter().any(|f| &f.name == k)
            && class
                .methods
                .values()
                .filter(|o| !std::ptr::eq(*o, m))
                .all(|o| !assigned_vars(&o.body).contains(k))
    };
    links
        .into_iter()
        .filter(|(k, _)| own(k))
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
}

/// Abstract environment at the exit of `m`.
pub fn method_exit_env(class: &ResolvedClass, m: &ResolvedMethod) -> AbsEnv {
    Analyzer {
        links: future_links(class, m),
        low_fields: BTreeSet::new(),
        location: String::new(),
        witnesses: None,
    }
    .exec(&m.body, &initial_env(class, m), Level::L)
}

fn low_fields(class: &ResolvedClass, m: &ResolvedMethod) -> BTreeSet<String> {
    class
        .attr_template()
        .filter(|v| v.level == Level::L)
        .map(|v| v.name.clone())
        .filter(|n| !m.formals.iter().chain(&m.locals).any(|l| &l.name == n))
        .collect()
}

pub fn classify_class(class: &ResolvedClass) -> ClassVerdict {
    let mut witnesses = Vec::new();
    for (name, m) in &class.methods {
        let mut a = Analyzer {
            links: future_links(class, m),
            low_fields: low_fields(class, m),
            location: format!("{}.{}", class.name, name),
            witnesses: Some(&mut witnesses),
        };
        a.exec(&m.body, &initial_env(class, m), Level::L);
    }
    ClassVerdict {
        class: class.name.clone(),
        verdict: if witnesses.is_empty() {
            Verdict::Safe
        } else {
            Verdict::Unsafe
        },
        witnesses,
    }
}

pub fn classify_program(p: &ResolvedProgram) -> Report {
    p.classes
        .values()
        .map(|c| (c.name.clone(), classify_class(c)))
        .collect()
}

/// Human-readable rendering of a report.
pub fn render_report(r: &Report) -> String {
    let mut out = String::new();
    for v in r.values() {
        out.push_str(&format!("{}: {:?}\n", v.class, v.verdict));
        for w in &v.witnesses {
            out.push_str(&format!("  - {} ({})\n", w.location, w.reason));
        }
    }
    out
}
