//! Pretty printer producing source that re-parses to the same AST.

use std::fmt::Write;

use super::ast::*;
use crate::lattice::Level;
use crate::value::Value;

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.data_decls {
        match &d.alias {
            Some(t) => writeln!(out, "data type {} = {};", d.name, ty(t, None)).unwrap(),
            None => writeln!(out, "data type {};", d.name).unwrap(),
        }
    }
    for i in &p.interfaces {
        writeln!(out, "interface {} {{", i.name).unwrap();
        for m in &i.methods {
            writeln!(out, "  {};", sig(m)).unwrap();
        }
        out.push_str("}\n");
    }
    for c in &p.classes {
        out.push_str("class ");
        out.push_str(&c.name);
        if !c.params.is_empty() {
            out.push_str(&formals(&c.params));
        }
        if !c.implements.is_empty() {
            write!(out, " implements {}", c.implements.join(", ")).unwrap();
        }
        out.push_str(" {\n");
        for f in &c.fields {
            writeln!(out, "  {}", decl(f)).unwrap();
        }
        for s in &c.init {
            block_stmt(&mut out, s, 1);
        }
        for m in &c.methods {
            writeln!(out, "  {} {{", sig(&m.sig)).unwrap();
            for l in &m.locals {
                writeln!(out, "    {}", decl(l)).unwrap();
            }
            for s in &m.body {
                block_stmt(&mut out, s, 2);
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    if let Some(m) = &p.main {
        out.push_str("main {\n");
        for d in &m.decls {
            writeln!(out, "  {}", decl(d)).unwrap();
        }
        for s in &m.body {
            block_stmt(&mut out, s, 1);
        }
        out.push_str("}\n");
    }
    out
}

fn block_stmt(out: &mut String, s: &Stmt, depth: usize) {
    writeln!(out, "{}{};", "  ".repeat(depth), pretty_stmt(s)).unwrap();
}

fn level_suffix(level: Option<Level>) -> &'static str {
    match level {
        Some(Level::H) => "_H",
        Some(Level::L) => "_L",
        None => "",
    }
}

fn ty(t: &TypeRef, level: Option<Level>) -> String {
    let mut s = t.name.clone();
    if !t.args.is_empty() {
        let args: Vec<String> = t.args.iter().map(|a| ty(a, None)).collect();
        write!(s, "[{}]", args.join(", ")).unwrap();
    }
    s.push_str(level_suffix(level));
    s
}

fn formals(vs: &[VarDecl]) -> String {
    let parts: Vec<String> = vs
        .iter()
        .map(|v| format!("{} {}", ty(&v.ty, v.level), v.name))
        .collect();
    format!("({})", parts.join(", "))
}

fn sig(m: &MethodSig) -> String {
    format!("{} {}{}", ty(&m.ret, m.ret_level), m.name, formals(&m.formals))
}

fn decl(d: &Declaration) -> String {
    let head = format!("{} {}", ty(&d.var.ty, d.var.level), d.var.name);
    match &d.init {
        Some(e) => format!("{head} = {};", pretty_expr(e)),
        None => format!("{head};"),
    }
}

pub fn pretty_stmts(stmts: &[Stmt]) -> String {
    if stmts.is_empty() {
        return "skip".to_string();
    }
    stmts.iter().map(pretty_stmt).collect::<Vec<_>>().join("; ")
}

pub fn pretty_stmt(s: &Stmt) -> String {
    match s {
        Stmt::New {
            target,
            level,
            class,
            args,
        } => {
            let kw = match level {
                Some(Level::H) => "new_H",
                Some(Level::L) => "new_L",
                None => "new",
            };
            format!("{target} := {kw} {class}({})", exprs(args))
        }
        Stmt::Return(e) => format!("return {}", pretty_expr(e)),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let mut s = format!("if {} th {}", pretty_expr(cond), pretty_stmts(then_branch));
            if let Some(b) = else_branch {
                write!(s, " el {}", pretty_stmts(b)).unwrap();
            }
            s.push_str(" fi");
            s
        }
        Stmt::Call { callee, method, args } => format!("!{}.{method}({})", pretty_expr(callee), exprs(args)),
        Stmt::FutCall {
            future,
            callee,
            method,
            args,
        } => format!("{future}!{}.{method}({})", pretty_expr(callee), exprs(args)),
        Stmt::Get { future, target } => format!("{future}?({target})"),
        Stmt::Assign { target, value } => format!("{target} := {}", pretty_expr(value)),
        Stmt::EndIf(sl) => format!("endif({})", pretty_stmts(sl)),
    }
}

fn exprs(es: &[Expr]) -> String {
    es.iter().map(pretty_expr).collect::<Vec<_>>().join(", ")
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Lt => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul => 6,
        BinOp::Cons => 9,
    }
}

fn op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Eq => "=",
        BinOp::Lt => "<",
        BinOp::And => "and",
        BinOp::Or => "or",
        BinOp::Cons => "cons",
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    expr_at(e, 0)
}

fn expr_at(e: &Expr, min: u8) -> String {
    match e {
        Expr::Var(v) => v.clone(),
        Expr::This => "this".to_string(),
        Expr::Lit(v) => literal(v),
        Expr::Tagged(t) => literal(&t.value),
        Expr::List(items) => format!("[{}]", exprs(items)),
        Expr::Un(UnOp::Head, a) => format!("head({})", pretty_expr(a)),
        Expr::Un(UnOp::Tail, a) => format!("tail({})", pretty_expr(a)),
        Expr::Un(UnOp::Not, a) => wrap(format!("not {}", expr_at(a, 3)), 3, min),
        Expr::Bin(BinOp::Cons, a, b) => format!("cons({}, {})", pretty_expr(a), pretty_expr(b)),
        Expr::Bin(op, a, b) => {
            let p = prec(*op);
            let s = format!("{} {} {}", expr_at(a, p), op_text(*op), expr_at(b, p + 1));
            wrap(s, p, min)
        }
    }
}

fn wrap(s: String, p: u8, min: u8) -> String {
    if p < min {
        format!("({s})")
    } else {
        s
    }
}

fn literal(v: &Value) -> String {
    match v {
        Value::Int(i) if *i < 0 => format!("-{}", i.unsigned_abs()),
        Value::List(items) if !items.is_empty() => {
            format!("[{}]", items.iter().map(literal).collect::<Vec<_>>().join(", "))
        }
        Value::Str(s) => {
            let mut out = String::from("\"");
            for c in s.chars() {
                match c {
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
        // identities never occur in source; print them as their rendering
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::{parse_expr, parse_program, parse_stmts};

    #[test]
    fn minimal_parens() {
        for src in [
            "a - (b - c)",
            "(a or b) and c",
            "not a = b",
            "(not a) = b",
            "a * (b + c)",
            "a - b - c",
        ] {
            let e = parse_expr(src).unwrap();
            assert_eq!(pretty_expr(&e), src);
        }
    }

    #[test]
    fn statements_round_trip() {
        let src = "q!lab.detectResult(a); q?(r); if r < 3 th skip el !d.signal(r, \"x\\n\") fi; x := new_H C(1, -2); return cons(1, Nil)";
        let s = parse_stmts(src).unwrap();
        assert_eq!(parse_stmts(&pretty_stmts(&s)).unwrap(), s);
    }

    #[test]
    fn program_round_trip() {
        let src = r#"
            data type Result = Int;
            interface I { Int_H m(Fut[Int]_H q, Int x); }
            class C(Int p) implements I {
                Int_H k = 3;
                I other = new C(1);
                Int_H m(Fut[Int]_H q, Int x) { Int y = 1; q?(y); return y + k; }
            }
            main { I c = new_L C(2); !c.m(null, 1); }
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(parse_program(&pretty_program(&p)).unwrap(), p);
    }
}
