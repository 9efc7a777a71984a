//! Recursive-descent parser producing [`Program`].
//!
//! `for` loops are desugared on the fly: the init statement is hoisted in
//! front of a `while` whose body ends with the step statement.

use super::ast::*;
use super::diagnostic::{Diagnostic, DiagnosticKind, Span};
use super::lexer::{Token, TokenKind};

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn peek_kind_at(&self, off: usize) -> Option<TokenKind> {
        self.tokens.get(self.pos + off).map(|t| t.kind)
    }

    fn at(&self, kind: TokenKind) -> bool {
        self.peek_kind().is_some_and(|k| k.same_class(kind))
    }

    fn end_span(&self) -> Span {
        match self.tokens.last() {
            Some(t) => Span::new(t.span.end, t.span.end, t.span.line, t.span.column + t.text.chars().count() as u32),
            None => Span::new(0, 0, 1, 1),
        }
    }

    fn current_span(&self) -> Span {
        self.peek().map_or_else(|| self.end_span(), |t| t.span)
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error(&self, expected: &[TokenKind]) -> Diagnostic {
        let found = match self.peek() {
            Some(t) => format!("`{}`", t.text),
            None => "end of input".to_string(),
        };
        let expected: Vec<String> = expected.iter().map(|k| k.describe()).collect();
        let msg = if expected.len() == 1 {
            format!("expected {}, found {found}", expected[0])
        } else {
            format!("expected one of {}, found {found}", expected.join(", "))
        };
        Diagnostic::at(DiagnosticKind::Syntax, msg, self.current_span())
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'t Token> {
        if self.at(kind) {
            let t = &self.tokens[self.pos];
            self.pos += 1;
            Ok(t)
        } else {
            Err(self.error(&[kind]))
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.at(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        Ok(self.expect(TokenKind::Ident)?.text.clone())
    }

    fn program(&mut self) -> PResult<Program> {
        let mut functions = Vec::new();
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Sync | TokenKind::Spawn => {
                    return Err(Diagnostic::at(
                        DiagnosticKind::SpawnOutsideFunction,
                        format!("`{}` may only appear inside a function body", tok.text),
                        tok.span,
                    ))
                }
                _ => functions.push(self.function()?),
            }
        }
        if functions.is_empty() {
            return Err(self.error(&[TokenKind::Task, TokenKind::I64, TokenKind::Void]));
        }
        Ok(Program::new(functions))
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let start = self.current_span();
        let is_task = self.eat(TokenKind::Task);
        let return_type = if self.eat(TokenKind::I64) {
            ReturnType::I64
        } else if self.eat(TokenKind::Void) {
            ReturnType::Void
        } else {
            let mut expected = vec![TokenKind::I64, TokenKind::Void];
            if !is_task {
                expected.insert(0, TokenKind::Task);
            }
            return Err(self.error(&expected));
        };
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.at(TokenKind::RParen) {
            loop {
                self.expect(TokenKind::I64)?;
                params.push(Param { name: self.ident()? });
                if !self.eat(TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        let header = start.to(self.prev_span());
        let body = self.block()?;
        Ok(FunctionDecl { name, params, return_type, body, is_task, span: header })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at(TokenKind::RBrace) {
            if self.peek().is_none() {
                return Err(self.error(&[TokenKind::RBrace]));
            }
            self.statement(&mut stmts)?;
        }
        self.expect(TokenKind::RBrace)?;
        Ok(stmts)
    }

    fn spawn_call(&mut self) -> PResult<(String, Vec<Expr>)> {
        self.expect(TokenKind::Spawn)?;
        let callee = self.ident()?;
        let args = self.call_args()?;
        Ok((callee, args))
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.at(TokenKind::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(args)
    }

    /// Assignment-like statement without its terminating `;`. Used both for
    /// ordinary statements and for the step clause of `for`.
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let start = self.current_span();
        let kind = match self.peek_kind() {
            Some(TokenKind::Let) => {
                self.pos += 1;
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                if self.at(TokenKind::Spawn) {
                    let (callee, args) = self.spawn_call()?;
                    StmtKind::SpawnAssign { dest: name, declare: true, callee, args }
                } else {
                    StmtKind::Let { name, value: self.expr()? }
                }
            }
            Some(TokenKind::Ident) => {
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                if self.at(TokenKind::Spawn) {
                    let (callee, args) = self.spawn_call()?;
                    StmtKind::SpawnAssign { dest: name, declare: false, callee, args }
                } else {
                    StmtKind::Assign { name, value: self.expr()? }
                }
            }
            Some(TokenKind::Mem) => {
                self.pos += 1;
                self.expect(TokenKind::LBracket)?;
                let addr = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                self.expect(TokenKind::Assign)?;
                StmtKind::MemStore { addr, value: self.expr()? }
            }
            _ => return Err(self.error(&[TokenKind::Let, TokenKind::Ident, TokenKind::Mem])),
        };
        Ok(Stmt::new(kind, start.to(self.prev_span())))
    }

    fn statement(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let start = self.current_span();
        let Some(kind) = self.peek_kind() else {
            return Err(self.error(&[TokenKind::RBrace]));
        };
        match kind {
            TokenKind::Let | TokenKind::Ident | TokenKind::Mem => {
                let mut s = self.simple_stmt()?;
                self.expect(TokenKind::Semicolon)?;
                s.span = start.to(self.prev_span());
                out.push(s);
            }
            TokenKind::Spawn => {
                let (callee, args) = self.spawn_call()?;
                self.expect(TokenKind::Semicolon)?;
                out.push(Stmt::new(StmtKind::SpawnVoid { callee, args }, start.to(self.prev_span())));
            }
            TokenKind::Sync => {
                self.pos += 1;
                self.expect(TokenKind::Semicolon)?;
                out.push(Stmt::new(StmtKind::Sync, start.to(self.prev_span())));
            }
            TokenKind::If => out.push(self.if_stmt()?),
            TokenKind::While => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let span = start.to(self.prev_span());
                let body = self.block()?;
                out.push(Stmt::new(StmtKind::While { cond, body }, span));
            }
            TokenKind::For => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let mut init = Vec::new();
                self.statement(&mut init)?;
                let cond = self.expr()?;
                self.expect(TokenKind::Semicolon)?;
                let step = self.simple_stmt()?;
                self.expect(TokenKind::RParen)?;
                let span = start.to(self.prev_span());
                let mut body = self.block()?;
                body.push(step);
                out.extend(init);
                out.push(Stmt::new(StmtKind::While { cond, body }, span));
            }
            TokenKind::Return => {
                self.pos += 1;
                let value = if self.at(TokenKind::Semicolon) { None } else { Some(self.expr()?) };
                self.expect(TokenKind::Semicolon)?;
                out.push(Stmt::new(StmtKind::Return(value), start.to(self.prev_span())));
            }
            TokenKind::PragmaDae => {
                self.pos += 1;
                if self.at(TokenKind::PragmaDae) {
                    return Err(Diagnostic::at(
                        DiagnosticKind::NestedDaePragma,
                        "DAE pragmas cannot be nested",
                        self.current_span(),
                    ));
                }
                let mut inner = Vec::new();
                self.statement(&mut inner)?;
                if inner.len() != 1 {
                    return Err(Diagnostic::at(
                        DiagnosticKind::DaeTarget,
                        "DAE pragma must precede a single statement",
                        start.to(self.prev_span()),
                    ));
                }
                let inner = inner.pop().unwrap();
                let span = start.to(inner.span);
                out.push(Stmt::new(StmtKind::DaePragma(Box::new(inner)), span));
            }
            _ => {
                return Err(self.error(&[
                    TokenKind::Let,
                    TokenKind::Ident,
                    TokenKind::Spawn,
                    TokenKind::Sync,
                    TokenKind::If,
                    TokenKind::While,
                    TokenKind::For,
                    TokenKind::Return,
                    TokenKind::Mem,
                    TokenKind::RBrace,
                ]))
            }
        }
        Ok(())
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.current_span();
        self.expect(TokenKind::If)?;
        self.expect(TokenKind::LParen)?;
        let cond = self.expr()?;
        self.expect(TokenKind::RParen)?;
        let span = start.to(self.prev_span());
        let then_block = self.block()?;
        let else_block = if self.eat(TokenKind::Else) {
            if self.at(TokenKind::If) {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::If { cond, then_block, else_block }, span))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(kind: TokenKind) -> Option<BinOp> {
        Some(match kind {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_kind().and_then(Self::binop) {
            if op.precedence() < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(TokenKind::Minus) {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat(TokenKind::Bang) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return Err(self.error(&[TokenKind::Int(0), TokenKind::Ident, TokenKind::LParen]));
        };
        match tok.kind {
            TokenKind::Int(v) => {
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            TokenKind::Ident => {
                if self.peek_kind_at(1) == Some(TokenKind::LParen) {
                    return Err(Diagnostic::at(
                        DiagnosticKind::Syntax,
                        format!("function calls are not expressions; use `spawn {}(..)` as a statement", tok.text),
                        tok.span,
                    ));
                }
                self.pos += 1;
                Ok(Expr::Var(tok.text.clone()))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Mem => {
                self.pos += 1;
                self.expect(TokenKind::LBracket)?;
                let addr = self.expr()?;
                self.expect(TokenKind::RBracket)?;
                Ok(Expr::MemLoad(Box::new(addr)))
            }
            TokenKind::MemXchg => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let addr = self.expr()?;
                self.expect(TokenKind::Comma)?;
                let value = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::MemXchg(Box::new(addr), Box::new(value)))
            }
            TokenKind::Spawn => Err(Diagnostic::at(
                DiagnosticKind::SpawnInExpression,
                "a spawn must be the entire right-hand side of an assignment",
                tok.span,
            )),
            _ => Err(self.error(&[
                TokenKind::Int(0),
                TokenKind::Ident,
                TokenKind::LParen,
                TokenKind::Mem,
                TokenKind::MemXchg,
                TokenKind::Minus,
                TokenKind::Bang,
            ])),
        }
    }
}

/// Parses a token stream into a program, or returns the first syntax error.
pub fn parse(tokens: &[Token]) -> Result<Program, Diagnostic> {
    Parser { tokens, pos: 0 }.program()
}
