//! Recursive-descent parser for `.sob` sources.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;
use crate::lattice::Level;
use crate::value::Value;

pub fn parse_program(src: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser::new(src)?;
    let mut program = Program::default();
    while !p.at_eof() {
        if p.eat_kw("interface") {
            program.interfaces.push(p.interface()?);
        } else if p.eat_kw("class") {
            program.classes.push(p.class()?);
        } else if p.eat_kw("data") {
            program.data_decls.push(p.data_decl()?);
        } else if p.peek_kw("main") {
            let tok = p.next();
            if program.main.is_some() {
                return Err(p.error_at(&tok, "duplicate main block"));
            }
            program.main = Some(p.main_block()?);
        } else {
            return Err(p.unexpected("`interface`, `class`, `data` or `main`"));
        }
    }
    Ok(program)
}

/// Parses a bare statement list, as found in a method body.
pub fn parse_stmts(src: &str) -> Result<Vec<Stmt>, SyntaxError> {
    let mut p = Parser::new(src)?;
    let stmts = p.stmt_list()?;
    if !p.at_eof() {
        return Err(p.unexpected("a statement"));
    }
    Ok(stmts)
}

pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

const KEYWORDS: &[&str] = &[
    "interface",
    "class",
    "implements",
    "data",
    "type",
    "main",
    "if",
    "th",
    "then",
    "el",
    "else",
    "fi",
    "return",
    "skip",
    "new",
    "new_H",
    "new_L",
    "true",
    "false",
    "Nil",
    "null",
    "error",
    "this",
    "and",
    "or",
    "not",
    "head",
    "tail",
    "cons",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn error_at(&self, tok: &Token, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(tok.line, tok.col, msg)
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        let t = &self.toks[self.pos];
        SyntaxError::new(
            t.line,
            t.col,
            format!("expected {expected}, found {}", t.tok.describe()),
        )
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn peek_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.peek_sym(sym) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{sym}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    // ---- declarations ----

    fn data_decl(&mut self) -> Result<DataDecl, SyntaxError> {
        self.expect_kw("type")?;
        let name = self.ident()?;
        let alias = if self.eat_sym("=") {
            let (ty, level) = self.type_ref()?;
            if level.is_some() {
                return Err(self.unexpected("`;` (data types carry no level)"));
            }
            Some(ty)
        } else {
            None
        };
        self.expect_sym(";")?;
        Ok(DataDecl { name, alias })
    }

    fn interface(&mut self) -> Result<InterfaceDecl, SyntaxError> {
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut methods = Vec::new();
        while !self.eat_sym("}") {
            let (ret, ret_level) = self.type_ref()?;
            let mname = self.ident()?;
            let formals = self.params()?;
            self.expect_sym(";")?;
            methods.push(MethodSig {
                name: mname,
                ret,
                ret_level,
                formals,
            });
        }
        Ok(InterfaceDecl { name, methods })
    }

    fn class(&mut self) -> Result<ClassDecl, SyntaxError> {
        let name = self.ident()?;
        let params = if self.peek_sym("(") { self.params()? } else { Vec::new() };
        let mut implements = Vec::new();
        if self.eat_kw("implements") {
            implements.push(self.ident()?);
            while self.eat_sym(",") {
                implements.push(self.ident()?);
            }
        }
        self.expect_sym("{")?;
        let mut class = ClassDecl {
            name,
            params,
            implements,
            fields: Vec::new(),
            init: Vec::new(),
            methods: Vec::new(),
        };
        while !self.eat_sym("}") {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            if self.at_stmt_start() {
                let s = self.stmt()?;
                self.stmt_terminator(&s)?;
                class.init.extend(s);
                continue;
            }
            let (ty, level) = self.type_ref()?;
            let member = self.ident()?;
            if self.peek_sym("(") {
                let formals = self.params()?;
                class.methods.push(self.method_body(MethodSig {
                    name: member,
                    ret: ty,
                    ret_level: level,
                    formals,
                })?);
            } else {
                let var = VarDecl {
                    name: member,
                    ty,
                    level,
                };
                self.declaration_rest(var, &mut class.fields, &mut class.init)?;
            }
        }
        Ok(class)
    }

    fn main_block(&mut self) -> Result<MainBlock, SyntaxError> {
        self.expect_sym("{")?;
        let mut decls = Vec::new();
        let mut body = Vec::new();
        while self.at_decl_start() {
            let (ty, level) = self.type_ref()?;
            let name = self.ident()?;
            self.declaration_rest(VarDecl { name, ty, level }, &mut decls, &mut body)?;
        }
        body.extend(self.stmt_list()?);
        self.expect_sym("}")?;
        Ok(MainBlock { decls, body })
    }

    fn method_body(&mut self, sig: MethodSig) -> Result<MethodDecl, SyntaxError> {
        self.expect_sym("{")?;
        let mut locals = Vec::new();
        let mut body = Vec::new();
        while self.at_decl_start() {
            let (ty, level) = self.type_ref()?;
            let name = self.ident()?;
            self.declaration_rest(VarDecl { name, ty, level }, &mut locals, &mut body)?;
        }
        body.extend(self.stmt_list()?);
        self.expect_sym("}")?;
        Ok(MethodDecl { sig, locals, body })
    }

    /// After `Type name`: either `;` or `= init;`. Non-constant initializers
    /// become statements in `stmts`.
    fn declaration_rest(
        &mut self,
        var: VarDecl,
        decls: &mut Vec<Declaration>,
        stmts: &mut Vec<Stmt>,
    ) -> Result<(), SyntaxError> {
        let name = var.name.clone();
        let mut init = None;
        if self.eat_sym("=") {
            if let Some(level) = self.peek_new() {
                self.next();
                let (class, args) = self.new_rest()?;
                stmts.push(Stmt::New {
                    target: name,
                    level,
                    class,
                    args,
                });
            } else {
                let e = self.expr()?;
                if e.is_constant() {
                    init = Some(e);
                } else {
                    stmts.push(Stmt::assign(name, e));
                }
            }
        }
        self.expect_sym(";")?;
        decls.push(Declaration { var, init });
        Ok(())
    }

    fn params(&mut self) -> Result<Vec<VarDecl>, SyntaxError> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            let (ty, level) = self.type_ref()?;
            let name = self.ident()?;
            out.push(VarDecl { name, ty, level });
            if self.eat_sym(")") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    /// `Name`, `Name_H`, `Fut[T]`, `Fut[T]_H`.
    fn type_ref(&mut self) -> Result<(TypeRef, Option<Level>), SyntaxError> {
        let raw = self.ident()?;
        let (name, mut level) = split_level(&raw);
        let mut args = Vec::new();
        if self.eat_sym("[") {
            if level.is_some() {
                return Err(self.unexpected("a level after the type arguments"));
            }
            loop {
                let (arg, arg_level) = self.type_ref()?;
                if arg_level.is_some() {
                    return Err(self.unexpected("an unannotated type argument"));
                }
                args.push(arg);
                if self.eat_sym("]") {
                    break;
                }
                self.expect_sym(",")?;
            }
            if let Tok::Ident(s) = self.peek().clone() {
                if s == "_H" || s == "_L" {
                    self.next();
                    level = split_level(&format!("T{s}")).1;
                }
            }
        }
        Ok((TypeRef { name, args }, level))
    }

    // ---- statements ----

    fn at_decl_start(&self) -> bool {
        match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(a), Tok::Ident(_)) => !KEYWORDS.contains(&a.as_str()),
            (Tok::Ident(a), Tok::Sym("[")) => !KEYWORDS.contains(&a.as_str()),
            _ => false,
        }
    }

    fn at_stmt_start(&self) -> bool {
        match self.peek() {
            Tok::Sym("!") => true,
            Tok::Ident(s) if s == "if" || s == "return" || s == "skip" => true,
            Tok::Ident(_) => matches!(self.peek_at(1), Tok::Sym(":=") | Tok::Sym("!") | Tok::Sym("?")),
            _ => false,
        }
    }

    fn at_list_end(&self) -> bool {
        self.at_eof() || self.peek_sym("}") || ["el", "else", "fi"].iter().any(|k| self.peek_kw(k))
    }

    fn stmt_list(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        while !self.at_list_end() {
            if !self.at_stmt_start() {
                return Err(self.unexpected("a statement"));
            }
            let s = self.stmt()?;
            self.stmt_terminator(&s)?;
            out.extend(s);
        }
        Ok(out)
    }

    /// `;` ends a statement; it may be omitted after `fi` and before a closer.
    fn stmt_terminator(&mut self, s: &Option<Stmt>) -> Result<(), SyntaxError> {
        if self.eat_sym(";") || matches!(s, Some(Stmt::If { .. })) || self.at_list_end() {
            Ok(())
        } else {
            Err(self.unexpected("`;`"))
        }
    }

    fn peek_new(&self) -> Option<Option<Level>> {
        match self.peek() {
            Tok::Ident(s) if s == "new" => Some(None),
            Tok::Ident(s) if s == "new_H" => Some(Some(Level::H)),
            Tok::Ident(s) if s == "new_L" => Some(Some(Level::L)),
            _ => None,
        }
    }

    fn new_rest(&mut self) -> Result<(String, Vec<Expr>), SyntaxError> {
        let class = self.ident()?;
        let args = if self.peek_sym("(") { self.args()? } else { Vec::new() };
        Ok((class, args))
    }

    /// One statement; `skip` yields `None`.
    fn stmt(&mut self) -> Result<Option<Stmt>, SyntaxError> {
        if self.eat_kw("skip") {
            return Ok(None);
        }
        if self.eat_kw("return") {
            return Ok(Some(Stmt::Return(self.expr()?)));
        }
        if self.eat_kw("if") {
            let cond = self.expr()?;
            if !self.eat_kw("th") {
                self.expect_kw("then")?;
            }
            let then_branch = self.stmt_list()?;
            let else_branch = if self.eat_kw("el") || self.eat_kw("else") {
                Some(self.stmt_list()?)
            } else {
                None
            };
            self.expect_kw("fi")?;
            return Ok(Some(Stmt::If {
                cond,
                then_branch,
                else_branch,
            }));
        }
        if self.eat_sym("!") {
            let (callee, method, args) = self.call_rest()?;
            return Ok(Some(Stmt::Call { callee, method, args }));
        }
        let name = self.ident()?;
        if self.eat_sym(":=") {
            if let Some(level) = self.peek_new() {
                self.next();
                let (class, args) = self.new_rest()?;
                return Ok(Some(Stmt::New {
                    target: name,
                    level,
                    class,
                    args,
                }));
            }
            return Ok(Some(Stmt::assign(name, self.expr()?)));
        }
        if self.eat_sym("!") {
            let (callee, method, args) = self.call_rest()?;
            return Ok(Some(Stmt::FutCall {
                future: name,
                callee,
                method,
                args,
            }));
        }
        if self.eat_sym("?") {
            self.expect_sym("(")?;
            let target = self.ident()?;
            self.expect_sym(")")?;
            return Ok(Some(Stmt::Get { future: name, target }));
        }
        Err(self.unexpected("`:=`, `!` or `?`"))
    }

    /// `callee.m(args)` after the `!`.
    fn call_rest(&mut self) -> Result<(Expr, String, Vec<Expr>), SyntaxError> {
        let callee = if self.eat_kw("this") {
            Expr::This
        } else {
            Expr::Var(self.ident()?)
        };
        self.expect_sym(".")?;
        let method = self.ident()?;
        let args = self.args()?;
        Ok((callee, method, args))
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_sym(")") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    // ---- expressions ----
    // or < and < not < (= <) < (+ -) < * < atoms

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("or") {
            lhs = Expr::bin(BinOp::Or, lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw("and") {
            lhs = Expr::bin(BinOp::And, lhs, self.not_expr()?);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("not") {
            return Ok(Expr::Un(UnOp::Not, Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = if self.eat_sym("=") {
                BinOp::Eq
            } else if self.eat_sym("<") {
                BinOp::Lt
            } else {
                return Ok(lhs);
            };
            lhs = Expr::bin(op, lhs, self.add_expr()?);
        }
    }

    fn add_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::bin(op, lhs, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.atom()?;
        while self.eat_sym("*") {
            lhs = Expr::bin(BinOp::Mul, lhs, self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let tok = self.next();
        let (line, col) = (tok.line, tok.col);
        let at = |msg: String| SyntaxError::new(line, col, msg);
        match tok.tok {
            Tok::Int(i) => Ok(Expr::int(i)),
            Tok::Str(s) => Ok(Expr::Lit(Value::Str(s))),
            Tok::Sym("-") => match self.next().tok {
                Tok::Int(i) => Ok(Expr::int(-i)),
                _ => Err(at("`-` must be followed by an integer literal".to_string())),
            },
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                let mut items = Vec::new();
                if !self.eat_sym("]") {
                    loop {
                        items.push(self.expr()?);
                        if self.eat_sym("]") {
                            break;
                        }
                        self.expect_sym(",")?;
                    }
                }
                Ok(Expr::List(items))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => Ok(Expr::Lit(Value::Bool(true))),
                "false" => Ok(Expr::Lit(Value::Bool(false))),
                "Nil" => Ok(Expr::Lit(Value::List(Vec::new()))),
                "null" => Ok(Expr::Lit(Value::Null)),
                "error" => Ok(Expr::Lit(Value::Error)),
                "this" => Ok(Expr::This),
                "head" | "tail" => {
                    self.expect_sym("(")?;
                    let e = self.expr()?;
                    self.expect_sym(")")?;
                    let op = if s == "head" { UnOp::Head } else { UnOp::Tail };
                    Ok(Expr::Un(op, Box::new(e)))
                }
                "cons" => {
                    self.expect_sym("(")?;
                    let a = self.expr()?;
                    self.expect_sym(",")?;
                    let b = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(Expr::bin(BinOp::Cons, a, b))
                }
                kw if KEYWORDS.contains(&kw) => Err(at(format!("expected an expression, found `{kw}`"))),
                _ => Ok(Expr::Var(s)),
            },
            other => Err(at(format!("expected an expression, found {}", other.describe()))),
        }
    }
}

fn split_level(raw: &str) -> (String, Option<Level>) {
    if raw.len() > 2 {
        if let Some(base) = raw.strip_suffix("_H") {
            return (base.to_string(), Some(Level::H));
        }
        if let Some(base) = raw.strip_suffix("_L") {
            return (base.to_string(), Some(Level::L));
        }
    }
    (raw.to_string(), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source() {
        let p = parse_program("").unwrap();
        assert!(p.classes.is_empty() && p.interfaces.is_empty());
    }

    #[test]
    fn unclosed_class() {
        let err = parse_program("class C {").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 10);
    }

    #[test]
    fn level_annotations() {
        let p = parse_program("interface I { Result_H f(Fut[Int]_H q, Int x); }").unwrap();
        let sig = &p.interfaces[0].methods[0];
        assert_eq!(sig.ret_level, Some(Level::H));
        assert_eq!(sig.ret.name, "Result");
        assert_eq!(sig.formals[0].level, Some(Level::H));
        assert_eq!(sig.formals[0].ty.args[0].name, "Int");
        assert_eq!(sig.formals[1].level, None);
    }

    #[test]
    fn implicit_flow_fragment() {
        let s = parse_stmts("if h th l1 := 1 el l2 := 0 fi").unwrap();
        assert_eq!(
            s,
            vec![Stmt::If {
                cond: Expr::var("h"),
                then_branch: vec![Stmt::assign("l1", Expr::int(1))],
                else_branch: Some(vec![Stmt::assign("l2", Expr::int(0))]),
            }]
        );
        let s = parse_stmts("h := 0; if h th l := 1 fi; return l").unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn skip_is_empty() {
        assert_eq!(parse_stmts("skip; skip").unwrap(), vec![]);
    }

    #[test]
    fn field_initializers_lower_to_init() {
        let p = parse_program(
            "class C(Int p) implements I { ProxyI proxy = new_H Proxy(this); Int k = 3; Int j = p + 1; !this.go(); }",
        )
        .unwrap();
        let c = &p.classes[0];
        assert_eq!(c.fields.len(), 3);
        assert_eq!(c.fields[1].init, Some(Expr::int(3)));
        assert_eq!(c.fields[2].init, None);
        assert!(matches!(
            &c.init[0],
            Stmt::New {
                level: Some(Level::H),
                ..
            }
        ));
        assert!(matches!(&c.init[1], Stmt::Assign { target, .. } if target == "j"));
        assert!(matches!(&c.init[2], Stmt::Call { callee: Expr::This, .. }));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c = d or not e and f").unwrap();
        let expected = Expr::bin(
            BinOp::Or,
            Expr::bin(
                BinOp::Eq,
                Expr::bin(
                    BinOp::Add,
                    Expr::var("a"),
                    Expr::bin(BinOp::Mul, Expr::var("b"), Expr::var("c")),
                ),
                Expr::var("d"),
            ),
            Expr::bin(
                BinOp::And,
                Expr::Un(UnOp::Not, Box::new(Expr::var("e"))),
                Expr::var("f"),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn missing_semicolon() {
        let err = parse_stmts("x := 1 y := 2").unwrap_err();
        assert_eq!((err.line, err.col), (1, 8));
    }
}
