//! Name resolution, signature lookup and declared-level defaulting.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use crate::engine::eval::eval_const;
use crate::lattice::Level;
use crate::value::Value;

/// Name of the synthetic class backing a `main { ... }` block.
pub const MAIN_CLASS: &str = "Main";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolutionError {
    #[error("duplicate interface `{0}`")]
    DuplicateInterface(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("duplicate data type `{0}`")]
    DuplicateData(String),
    #[error("duplicate method `{method}` in `{owner}`")]
    DuplicateMethod { owner: String, method: String },
    #[error("duplicate variable `{name}` in {scope}")]
    DuplicateVariable { scope: String, name: String },
    #[error("`{name}` is reserved and cannot be declared in {scope}")]
    ReservedName { scope: String, name: String },
    #[error("class `{0}` implements no interface")]
    NoInterface(String),
    #[error("unknown interface `{name}` implemented by `{class}`")]
    UnknownInterface { class: String, name: String },
    #[error("class `{class}` does not implement `{interface}.{method}`")]
    MissingMethod {
        class: String,
        interface: String,
        method: String,
    },
    #[error("unknown class `{name}` in {context}")]
    UnknownClass { context: String, name: String },
    #[error("unknown method `{name}` in {context}")]
    UnknownMethod { context: String, name: String },
    #[error("unknown variable `{name}` in {context}")]
    UnknownVariable { context: String, name: String },
    #[error("`{name}` in {context} expects {expected} argument(s), found {found}")]
    ArityMismatch {
        context: String,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("`{name}` in {context} is not typed by an interface and cannot be called")]
    NotCallable { context: String, name: String },
    #[error("future call on the list `{name}` in {context}; multicast needs `!{name}.m(..)`")]
    MulticastFuture { context: String, name: String },
    #[error("`return` must be the last statement of {0}")]
    MisplacedReturn(String),
    #[error("{0} must end with a `return`")]
    MissingReturn(String),
    #[error("initializer of `{name}` in {context} must be a constant: {reason}")]
    BadInitializer {
        context: String,
        name: String,
        reason: String,
    },
    #[error("a class named `{MAIN_CLASS}` conflicts with the main block")]
    MainConflict,
}

/// A declared variable with its resolved level and initial value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedVar {
    pub name: String,
    pub ty: TypeRef,
    pub level: Level,
    pub initial: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Field,
    Param,
    Formal,
    Local,
}

/// Signature of the method a call site targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSig {
    /// `None` for calls on `this`.
    pub interface: Option<String>,
    pub method: String,
    pub formal_levels: Vec<Level>,
    pub return_level: Level,
    pub multicast: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedSig {
    pub name: String,
    pub formals: Vec<ResolvedVar>,
    pub ret: TypeRef,
    pub return_level: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedMethod {
    pub name: String,
    pub formals: Vec<ResolvedVar>,
    pub return_type: TypeRef,
    pub return_level: Level,
    pub locals: Vec<ResolvedVar>,
    pub body: Vec<Stmt>,
    pub vars: BTreeMap<String, VarKind>,
    /// Keyed by (callee, method); the callee is a variable name or `this`.
    pub calls: BTreeMap<(String, String), CallSig>,
}

impl ResolvedMethod {
    /// Λ[m, i]
    pub fn formal_level(&self, i: usize) -> Option<Level> {
        self.formals.get(i).map(|f| f.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedClass {
    pub name: String,
    pub interfaces: Vec<String>,
    pub params: Vec<ResolvedVar>,
    pub fields: Vec<ResolvedVar>,
    /// User methods plus the synthetic `init`.
    pub methods: BTreeMap<String, ResolvedMethod>,
    pub synthetic: bool,
}

impl ResolvedClass {
    /// The attribute template: params then fields, at their declared levels.
    pub fn attr_template(&self) -> impl Iterator<Item = &ResolvedVar> {
        self.params.iter().chain(self.fields.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProgram {
    pub program: Program,
    pub interfaces: BTreeMap<String, Vec<ResolvedSig>>,
    pub classes: BTreeMap<String, ResolvedClass>,
    pub main_class: Option<String>,
}

impl ResolvedProgram {
    pub fn class(&self, name: &str) -> Option<&ResolvedClass> {
        self.classes.get(name)
    }

    pub fn method(&self, class: &str, method: &str) -> Option<&ResolvedMethod> {
        self.classes.get(class)?.methods.get(method)
    }
}

const RESERVED: &[&str] = &["this", "label"];

pub fn resolve_program(p: Program) -> Result<ResolvedProgram, ResolutionError> {
    let mut aliases: BTreeMap<String, Option<TypeRef>> = BTreeMap::new();
    for d in &p.data_decls {
        if aliases.insert(d.name.clone(), d.alias.clone()).is_some() {
            return Err(ResolutionError::DuplicateData(d.name.clone()));
        }
    }
    let cx = Ctx { aliases: &aliases };

    let mut interfaces = BTreeMap::new();
    for i in &p.interfaces {
        let mut seen = BTreeSet::new();
        let mut sigs = Vec::new();
        for m in &i.methods {
            if !seen.insert(m.name.clone()) {
                return Err(ResolutionError::DuplicateMethod {
                    owner: i.name.clone(),
                    method: m.name.clone(),
                });
            }
            let scope = format!("{}.{}", i.name, m.name);
            check_unique_vars(&scope, m.formals.iter().map(|f| &f.name))?;
            sigs.push(ResolvedSig {
                name: m.name.clone(),
                formals: m
                    .formals
                    .iter()
                    .map(|f| cx.var(f, f.level.unwrap_or_default()))
                    .collect(),
                ret: m.ret.clone(),
                return_level: m.ret_level.unwrap_or_default(),
            });
        }
        if interfaces.insert(i.name.clone(), sigs).is_some() {
            return Err(ResolutionError::DuplicateInterface(i.name.clone()));
        }
    }

    let mut decls: Vec<ClassDecl> = p.classes.clone();
    let mut main_class = None;
    if let Some(m) = &p.main {
        if decls.iter().any(|c| c.name == MAIN_CLASS) {
            return Err(ResolutionError::MainConflict);
        }
        decls.push(ClassDecl {
            name: MAIN_CLASS.to_string(),
            params: Vec::new(),
            implements: Vec::new(),
            fields: m.decls.clone(),
            init: m.body.clone(),
            methods: Vec::new(),
        });
        main_class = Some(MAIN_CLASS.to_string());
    }

    let mut class_names = BTreeSet::new();
    for c in &decls {
        if !class_names.insert(c.name.clone()) {
            return Err(ResolutionError::DuplicateClass(c.name.clone()));
        }
    }
    let arities: BTreeMap<String, usize> = decls.iter().map(|c| (c.name.clone(), c.params.len())).collect();

    let mut classes = BTreeMap::new();
    for c in &decls {
        let synthetic = main_class.as_deref() == Some(c.name.as_str());
        let rc = resolve_class(&cx, c, synthetic, &interfaces, &arities)?;
        classes.insert(c.name.clone(), rc);
    }

    Ok(ResolvedProgram {
        program: p,
        interfaces,
        classes,
        main_class,
    })
}

struct Ctx<'a> {
    aliases: &'a BTreeMap<String, Option<TypeRef>>,
}

impl Ctx<'_> {
    fn default_value(&self, ty: &TypeRef) -> Value {
        let mut t = ty.clone();
        // follow aliases, guarding against cycles
        for _ in 0..=self.aliases.len() {
            match self.aliases.get(&t.name) {
                Some(Some(next)) => t = next.clone(),
                _ => break,
            }
        }
        match t.name.as_str() {
            "Int" => Value::Int(0),
            "Bool" => Value::Bool(false),
            "String" => Value::Str(String::new()),
            "List" => Value::List(Vec::new()),
            _ => Value::Null,
        }
    }

    fn var(&self, v: &VarDecl, level: Level) -> ResolvedVar {
        ResolvedVar {
            name: v.name.clone(),
            ty: v.ty.clone(),
            level,
            initial: self.default_value(&v.ty),
        }
    }

    fn declared(&self, d: &Declaration, scope: &str) -> Result<ResolvedVar, ResolutionError> {
        let mut v = self.var(&d.var, d.var.level.unwrap_or_default());
        if let Some(e) = &d.init {
            v.initial = eval_const(e).map_err(|err| ResolutionError::BadInitializer {
                context: scope.to_string(),
                name: d.var.name.clone(),
                reason: err.to_string(),
            })?;
        }
        Ok(v)
    }
}

fn check_unique_vars<'a>(scope: &str, names: impl Iterator<Item = &'a String>) -> Result<(), ResolutionError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if RESERVED.contains(&n.as_str()) {
            return Err(ResolutionError::ReservedName {
                scope: scope.to_string(),
                name: n.clone(),
            });
        }
        if !seen.insert(n) {
            return Err(ResolutionError::DuplicateVariable {
                scope: scope.to_string(),
                name: n.clone(),
            });
        }
    }
    Ok(())
}

fn resolve_class(
    cx: &Ctx<'_>,
    c: &ClassDecl,
    synthetic: bool,
    interfaces: &BTreeMap<String, Vec<ResolvedSig>>,
    arities: &BTreeMap<String, usize>,
) -> Result<ResolvedClass, ResolutionError> {
    let scope = format!("class {}", c.name);
    check_unique_vars(
        &scope,
        c.params
            .iter()
            .map(|v| &v.name)
            .chain(c.fields.iter().map(|d| &d.var.name)),
    )?;
    if !synthetic && c.implements.is_empty() {
        return Err(ResolutionError::NoInterface(c.name.clone()));
    }
    for i in &c.implements {
        if !interfaces.contains_key(i) {
            return Err(ResolutionError::UnknownInterface {
                class: c.name.clone(),
                name: i.clone(),
            });
        }
    }

    let params: Vec<ResolvedVar> = c
        .params
        .iter()
        .map(|v| cx.var(v, v.level.unwrap_or_default()))
        .collect();
    let fields = c
        .fields
        .iter()
        .map(|d| cx.declared(d, &scope))
        .collect::<Result<Vec<_>, _>>()?;

    let mut attr_types: BTreeMap<String, (TypeRef, VarKind)> = BTreeMap::new();
    for p in &params {
        attr_types.insert(p.name.clone(), (p.ty.clone(), VarKind::Param));
    }
    for f in &fields {
        attr_types.insert(f.name.clone(), (f.ty.clone(), VarKind::Field));
    }

    // Interface-declared levels, used when the class leaves one unannotated.
    let mut iface_sigs: BTreeMap<&str, (&str, &ResolvedSig)> = BTreeMap::new();
    for i in &c.implements {
        for s in &interfaces[i] {
            iface_sigs.entry(s.name.as_str()).or_insert((i.as_str(), s));
        }
    }

    let mut shells: BTreeMap<String, ResolvedMethod> = BTreeMap::new();
    let mut raw_bodies: BTreeMap<String, (Vec<Declaration>, Vec<Stmt>)> = BTreeMap::new();
    for m in &c.methods {
        if m.sig.name == "init" || shells.contains_key(&m.sig.name) {
            return Err(ResolutionError::DuplicateMethod {
                owner: c.name.clone(),
                method: m.sig.name.clone(),
            });
        }
        let mscope = format!("{}.{}", c.name, m.sig.name);
        check_unique_vars(
            &mscope,
            m.sig
                .formals
                .iter()
                .map(|f| &f.name)
                .chain(m.locals.iter().map(|d| &d.var.name)),
        )?;
        let inherited = iface_sigs.get(m.sig.name.as_str()).map(|(_, s)| *s);
        if let Some(s) = inherited {
            if s.formals.len() != m.sig.formals.len() {
                return Err(ResolutionError::ArityMismatch {
                    context: format!("class {}", c.name),
                    name: m.sig.name.clone(),
                    expected: s.formals.len(),
                    found: m.sig.formals.len(),
                });
            }
        }
        let formals = m
            .sig
            .formals
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let lvl = f
                    .level
                    .or_else(|| inherited.map(|s| s.formals[i].level))
                    .unwrap_or_default();
                cx.var(f, lvl)
            })
            .collect();
        let return_level = m
            .sig
            .ret_level
            .or_else(|| inherited.map(|s| s.return_level))
            .unwrap_or_default();
        let locals = m
            .locals
            .iter()
            .map(|d| {
                let mut v = cx.declared(d, &mscope)?;
                v.level = Level::L;
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        shells.insert(
            m.sig.name.clone(),
            ResolvedMethod {
                name: m.sig.name.clone(),
                formals,
                return_type: m.sig.ret.clone(),
                return_level,
                locals,
                body: Vec::new(),
                vars: BTreeMap::new(),
                calls: BTreeMap::new(),
            },
        );
        raw_bodies.insert(m.sig.name.clone(), (m.locals.clone(), m.body.clone()));
    }
    for i in &c.implements {
        for s in &interfaces[i] {
            if !shells.contains_key(&s.name) {
                return Err(ResolutionError::MissingMethod {
                    class: c.name.clone(),
                    interface: i.clone(),
                    method: s.name.clone(),
                });
            }
        }
    }

    // Synthetic init: bind each class parameter from its actual, then run the
    // class-level statements.
    let mut init_body: Vec<Stmt> = params
        .iter()
        .map(|p| Stmt::assign(p.name.clone(), Expr::var(format!("@{}", p.name))))
        .collect();
    init_body.extend(c.init.iter().cloned());
    let init_scope = format!("{}.init", c.name);
    if contains_return(&init_body) {
        return Err(ResolutionError::MisplacedReturn(init_scope));
    }
    init_body.push(Stmt::Return(Expr::Lit(Value::Null)));
    shells.insert(
        "init".to_string(),
        ResolvedMethod {
            name: "init".to_string(),
            formals: params
                .iter()
                .map(|p| ResolvedVar {
                    name: format!("@{}", p.name),
                    ..p.clone()
                })
                .collect(),
            return_type: TypeRef::simple("Void"),
            return_level: Level::L,
            locals: Vec::new(),
            body: Vec::new(),
            vars: BTreeMap::new(),
            calls: BTreeMap::new(),
        },
    );
    raw_bodies.insert("init".to_string(), (Vec::new(), init_body));

    let own_sigs: BTreeMap<String, (Vec<Level>, Level)> = shells
        .iter()
        .map(|(n, m)| (n.clone(), (m.formals.iter().map(|f| f.level).collect(), m.return_level)))
        .collect();

    let mut methods = BTreeMap::new();
    for (name, mut m) in shells {
        let (_, mut body) = raw_bodies.remove(&name).unwrap();
        let mscope = format!("{}.{}", c.name, name);
        if let Some((last, rest)) = body.split_last() {
            if contains_return(rest)
                || (!matches!(last, Stmt::Return(_)) && contains_return(std::slice::from_ref(last)))
            {
                return Err(ResolutionError::MisplacedReturn(mscope));
            }
        }
        if !matches!(body.last(), Some(Stmt::Return(_))) {
            if m.return_type.is_void() {
                body.push(Stmt::Return(Expr::Lit(Value::Null)));
            } else {
                return Err(ResolutionError::MissingReturn(mscope));
            }
        }

        let mut scope: BTreeMap<String, (TypeRef, VarKind)> = attr_types.clone();
        for f in &m.formals {
            scope.insert(f.name.clone(), (f.ty.clone(), VarKind::Formal));
        }
        for l in &m.locals {
            scope.insert(l.name.clone(), (l.ty.clone(), VarKind::Local));
        }
        let mut r = BodyResolver {
            context: mscope,
            scope: &scope,
            interfaces,
            arities,
            own: &own_sigs,
            vars: BTreeMap::new(),
            calls: BTreeMap::new(),
        };
        r.stmts(&body)?;
        m.vars = r.vars;
        m.calls = r.calls;
        m.body = body;
        methods.insert(name, m);
    }

    Ok(ResolvedClass {
        name: c.name.clone(),
        interfaces: c.implements.clone(),
        params,
        fields,
        methods,
        synthetic,
    })
}

fn contains_return(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Return(_) => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => contains_return(then_branch) || else_branch.as_deref().is_some_and(contains_return),
        Stmt::EndIf(sl) => contains_return(sl),
        _ => false,
    })
}

struct BodyResolver<'a> {
    context: String,
    scope: &'a BTreeMap<String, (TypeRef, VarKind)>,
    interfaces: &'a BTreeMap<String, Vec<ResolvedSig>>,
    arities: &'a BTreeMap<String, usize>,
    own: &'a BTreeMap<String, (Vec<Level>, Level)>,
    vars: BTreeMap<String, VarKind>,
    calls: BTreeMap<(String, String), CallSig>,
}

impl BodyResolver<'_> {
    fn var(&mut self, name: &str) -> Result<&TypeRef, ResolutionError> {
        if name == "label" {
            self.vars.insert(name.to_string(), VarKind::Local);
            return Ok(&LABEL_TYPE);
        }
        match self.scope.get(name) {
            Some((ty, kind)) => {
                self.vars.insert(name.to_string(), *kind);
                Ok(ty)
            }
            None => Err(ResolutionError::UnknownVariable {
                context: self.context.clone(),
                name: name.to_string(),
            }),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<(), ResolutionError> {
        let mut vs = Vec::new();
        e.vars(&mut vs);
        for v in vs {
            self.var(&v)?;
        }
        Ok(())
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), ResolutionError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ResolutionError> {
        match s {
            Stmt::New {
                target, class, args, ..
            } => {
                self.var(target)?;
                let expected = match self.arities.get(class) {
                    Some(n) if class != MAIN_CLASS => *n,
                    _ => {
                        return Err(ResolutionError::UnknownClass {
                            context: self.context.clone(),
                            name: class.clone(),
                        })
                    }
                };
                if expected != args.len() {
                    return Err(ResolutionError::ArityMismatch {
                        context: self.context.clone(),
                        name: class.clone(),
                        expected,
                        found: args.len(),
                    });
                }
                args.iter().try_for_each(|a| self.expr(a))
            }
            Stmt::Return(e) => self.expr(e),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expr(cond)?;
                self.stmts(then_branch)?;
                if let Some(b) = else_branch {
                    self.stmts(b)?;
                }
                Ok(())
            }
            Stmt::Call { callee, method, args } => {
                self.call(callee, method, args.len(), false)?;
                args.iter().try_for_each(|a| self.expr(a))
            }
            Stmt::FutCall {
                future,
                callee,
                method,
                args,
            } => {
                self.var(future)?;
                self.call(callee, method, args.len(), true)?;
                args.iter().try_for_each(|a| self.expr(a))
            }
            Stmt::Get { future, target } => {
                self.var(future)?;
                self.var(target)?;
                Ok(())
            }
            Stmt::Assign { target, value } => {
                self.var(target)?;
                self.expr(value)
            }
            Stmt::EndIf(sl) => self.stmts(sl),
        }
    }

    fn call(&mut self, callee: &Expr, method: &str, arity: usize, with_future: bool) -> Result<(), ResolutionError> {
        let (key, sig) = match callee {
            Expr::This => {
                let Some((formal_levels, return_level)) = self.own.get(method).filter(|_| method != "init") else {
                    return Err(self.unknown_method(method));
                };
                (
                    "this".to_string(),
                    CallSig {
                        interface: None,
                        method: method.to_string(),
                        formal_levels: formal_levels.clone(),
                        return_level: *return_level,
                        multicast: false,
                    },
                )
            }
            Expr::Var(name) => {
                let ty = self.var(name)?.clone();
                let (iface, multicast) = if self.interfaces.contains_key(&ty.name) {
                    (ty.name.clone(), false)
                } else if ty.name == "List" && ty.args.len() == 1 && self.interfaces.contains_key(&ty.args[0].name) {
                    (ty.args[0].name.clone(), true)
                } else {
                    return Err(ResolutionError::NotCallable {
                        context: self.context.clone(),
                        name: name.clone(),
                    });
                };
                if multicast && with_future {
                    return Err(ResolutionError::MulticastFuture {
                        context: self.context.clone(),
                        name: name.clone(),
                    });
                }
                let Some(s) = self.interfaces[&iface].iter().find(|s| s.name == method) else {
                    return Err(self.unknown_method(method));
                };
                (
                    name.clone(),
                    CallSig {
                        interface: Some(iface),
                        method: method.to_string(),
                        formal_levels: s.formals.iter().map(|f| f.level).collect(),
                        return_level: s.return_level,
                        multicast,
                    },
                )
            }
            _ => {
                return Err(ResolutionError::NotCallable {
                    context: self.context.clone(),
                    name: super::pretty::pretty_expr(callee),
                })
            }
        };
        if sig.formal_levels.len() != arity {
            return Err(ResolutionError::ArityMismatch {
                context: self.context.clone(),
                name: method.to_string(),
                expected: sig.formal_levels.len(),
                found: arity,
            });
        }
        self.calls.insert((key, method.to_string()), sig);
        Ok(())
    }

    fn unknown_method(&self, method: &str) -> ResolutionError {
        ResolutionError::UnknownMethod {
            context: self.context.clone(),
            name: method.to_string(),
        }
    }
}

static LABEL_TYPE: TypeRef = TypeRef {
    name: String::new(),
    args: Vec::new(),
};
