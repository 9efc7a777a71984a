//! MiniCilk front end: tokenize, parse, validate, normalize.

pub mod ast;
pub mod diagnostic;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod validate;

pub use ast::{BinOp, Block, Expr, FunctionDecl, Param, Program, ReturnType, Stmt, StmtKind, UnOp};
pub use diagnostic::{Diagnostic, DiagnosticKind, Diagnostics, Span};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use validate::{insert_implicit_syncs, validate};

/// Tokenizes and parses `source`.
pub fn parse_source(source: &str) -> Result<Program, Diagnostic> {
    parse(&tokenize(source)?)
}

/// Validates `program` and, if it is well-formed, inserts the implicit syncs
/// and returns that every later stage expects.
pub fn check(mut program: Program) -> Result<Program, Diagnostics> {
    let diags = validate(&program);
    if !diags.is_empty() {
        return Err(Diagnostics(diags));
    }
    let diags = insert_implicit_syncs(&mut program);
    if !diags.is_empty() {
        return Err(Diagnostics(diags));
    }
    Ok(program)
}

/// Parses and checks `source` with the given entry (or the default one).
pub fn compile_source(source: &str, entry: Option<&str>) -> Result<Program, Diagnostics> {
    let mut program = parse_source(source)?;
    if let Some(e) = entry {
        program = program.with_entry(e);
    }
    check(program)
}
