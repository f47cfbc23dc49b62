//! Source frontend: lexing, parsing, pretty printing and name resolution.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod resolve;

pub use ast::*;
pub use parser::{parse_expr, parse_program, parse_stmts};
pub use pretty::{pretty_expr, pretty_program, pretty_stmt, pretty_stmts};
pub use resolve::{
    resolve_program, CallSig, ResolutionError, ResolvedClass, ResolvedMethod, ResolvedProgram, ResolvedSig,
    ResolvedVar, VarKind, MAIN_CLASS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

/// Either stage of the frontend failing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("resolution error: {0}")]
    Resolution(#[from] ResolutionError),
}

/// Parse and resolve in one go.
pub fn load_program(src: &str) -> Result<ResolvedProgram, FrontendError> {
    Ok(resolve_program(parse_program(src)?)?)
}
