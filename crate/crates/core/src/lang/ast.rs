//! Abstract syntax of the core language.

use serde::{Deserialize, Serialize};

use crate::lattice::{Level, TaggedValue};
use crate::value::{IdMapper, Value};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Program {
    pub data_decls: Vec<DataDecl>,
    pub interfaces: Vec<InterfaceDecl>,
    pub classes: Vec<ClassDecl>,
    pub main: Option<MainBlock>,
}

/// `data type Name = Alias;` or `data type Name;`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDecl {
    pub name: String,
    pub alias: Option<TypeRef>,
}

/// A semantic type such as `Int`, `Fut[Result]` or `List[PersonnelI]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypeRef {
    pub name: String,
    pub args: Vec<TypeRef>,
}

impl TypeRef {
    pub fn simple(name: impl Into<String>) -> Self {
        TypeRef {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn is_void(&self) -> bool {
        self.name == "Void" && self.args.is_empty()
    }
}

/// A typed name with an optional declared level (`Result_H r`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeRef,
    pub level: Option<Level>,
}

/// Field or local declaration. `init` only ever holds a constant expression;
/// other initializers are lowered into statements by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub var: VarDecl,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSig {
    pub name: String,
    pub ret: TypeRef,
    pub ret_level: Option<Level>,
    pub formals: Vec<VarDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceDecl {
    pub name: String,
    pub methods: Vec<MethodSig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub sig: MethodSig,
    pub locals: Vec<Declaration>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub implements: Vec<String>,
    pub fields: Vec<Declaration>,
    pub init: Vec<Stmt>,
    pub methods: Vec<MethodDecl>,
}

/// The program's `main { ... }` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainBlock {
    pub decls: Vec<Declaration>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stmt {
    /// `x := new_lev C(args)`
    New {
        target: String,
        level: Option<Level>,
        class: String,
        args: Vec<Expr>,
    },
    Return(Expr),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    /// `!callee.m(args)`; the callee may evaluate to a list (multicast).
    Call {
        callee: Expr,
        method: String,
        args: Vec<Expr>,
    },
    /// `q!callee.m(args)`
    FutCall {
        future: String,
        callee: Expr,
        method: String,
        args: Vec<Expr>,
    },
    /// `q?(x)`
    Get {
        future: String,
        target: String,
    },
    /// `x := e`
    Assign {
        target: String,
        value: Expr,
    },
    /// Join point of a high `if`, carrying the untaken branch. Runtime only.
    EndIf(Vec<Stmt>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    And,
    Or,
    Cons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Expr {
    Var(String),
    Lit(Value),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Un(UnOp, Box<Expr>),
    List(Vec<Expr>),
    This,
    /// An already evaluated value injected by a future read. Runtime only.
    Tagged(TaggedValue),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn int(i: i64) -> Self {
        Expr::Lit(Value::Int(i))
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    /// True when the expression reads no variable and no `this`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::This => false,
            Expr::Lit(_) | Expr::Tagged(_) => true,
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Un(_, a) => a.is_constant(),
            Expr::List(items) => items.iter().all(Expr::is_constant),
        }
    }

    /// Variables read by the expression, in order of occurrence.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Expr::Un(_, a) => a.vars(out),
            Expr::List(items) => items.iter().for_each(|e| e.vars(out)),
            Expr::Lit(_) | Expr::This | Expr::Tagged(_) => {}
        }
    }

    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        match self {
            Expr::Lit(v) => v.map_ids(map),
            Expr::Tagged(t) => t.value.map_ids(map),
            Expr::Bin(_, a, b) => {
                a.map_ids(map);
                b.map_ids(map);
            }
            Expr::Un(_, a) => a.map_ids(map),
            Expr::List(items) => items.iter_mut().for_each(|e| e.map_ids(map)),
            Expr::Var(_) | Expr::This => {}
        }
    }
}

impl Stmt {
    pub fn assign(target: impl Into<String>, value: Expr) -> Self {
        Stmt::Assign {
            target: target.into(),
            value,
        }
    }

    pub fn map_ids(&mut self, map: &mut impl IdMapper) {
        match self {
            Stmt::New { args, .. } => args.iter_mut().for_each(|e| e.map_ids(map)),
            Stmt::Return(e) => e.map_ids(map),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.map_ids(map);
                then_branch.iter_mut().for_each(|s| s.map_ids(map));
                if let Some(b) = else_branch {
                    b.iter_mut().for_each(|s| s.map_ids(map));
                }
            }
            Stmt::Call { callee, args, .. } | Stmt::FutCall { callee, args, .. } => {
                callee.map_ids(map);
                args.iter_mut().for_each(|e| e.map_ids(map));
            }
            Stmt::Assign { value, .. } => value.map_ids(map),
            Stmt::EndIf(sl) => sl.iter_mut().for_each(|s| s.map_ids(map)),
            Stmt::Get { .. } => {}
        }
    }
}

/// Every variable that is the target of an assignment anywhere in `stmts`,
/// including `new`, get and future-call targets and nested branches.
pub fn assigned_vars(stmts: &[Stmt]) -> Vec<String> {
    fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::New { target, .. } | Stmt::Assign { target, .. } | Stmt::Get { target, .. } => {
                    push_unique(out, target)
                }
                Stmt::FutCall { future, .. } => push_unique(out, future),
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    if let Some(b) = else_branch {
                        walk(b, out);
                    }
                }
                Stmt::EndIf(sl) => walk(sl, out),
                Stmt::Return(_) | Stmt::Call { .. } => {}
            }
        }
    }
    fn push_unique(out: &mut Vec<String>, v: &str) {
        if !out.iter().any(|x| x == v) {
            out.push(v.to_string());
        }
    }
    let mut out = Vec::new();
    walk(stmts, &mut out);
    out
}
