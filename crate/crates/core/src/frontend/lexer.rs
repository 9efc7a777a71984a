//! Tokenizer for MiniCilk source.
//!
//! Whitespace and comments are skipped but never rewritten, so the gaps
//! between consecutive token spans are exactly the skipped text.

use super::diagnostic::{Diagnostic, DiagnosticKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Task,
    I64,
    Void,
    Let,
    Spawn,
    Sync,
    If,
    Else,
    While,
    For,
    Return,
    Mem,
    MemXchg,
    Ident,
    Int(i64),
    PragmaDae,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semicolon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
}

impl TokenKind {
    pub fn describe(self) -> String {
        use TokenKind::*;
        let s = match self {
            Task => "`task`",
            I64 => "`i64`",
            Void => "`void`",
            Let => "`let`",
            Spawn => "`spawn`",
            Sync => "`sync`",
            If => "`if`",
            Else => "`else`",
            While => "`while`",
            For => "`for`",
            Return => "`return`",
            Mem => "`mem`",
            MemXchg => "`mem_xchg`",
            Ident => "identifier",
            Int(_) => "integer literal",
            PragmaDae => "DAE pragma",
            LParen => "`(`",
            RParen => "`)`",
            LBrace => "`{`",
            RBrace => "`}`",
            LBracket => "`[`",
            RBracket => "`]`",
            Comma => "`,`",
            Semicolon => "`;`",
            Assign => "`=`",
            Plus => "`+`",
            Minus => "`-`",
            Star => "`*`",
            Slash => "`/`",
            Percent => "`%`",
            EqEq => "`==`",
            NotEq => "`!=`",
            Lt => "`<`",
            Le => "`<=`",
            Gt => "`>`",
            Ge => "`>=`",
            AndAnd => "`&&`",
            OrOr => "`||`",
            Bang => "`!`",
        };
        s.to_string()
    }

    /// Compares kinds ignoring literal payloads.
    pub fn same_class(self, other: TokenKind) -> bool {
        std::mem::discriminant(&self) == std::mem::discriminant(&other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "task" => TokenKind::Task,
        "i64" => TokenKind::I64,
        "void" => TokenKind::Void,
        "let" => TokenKind::Let,
        "spawn" => TokenKind::Spawn,
        "sync" => TokenKind::Sync,
        "if" => TokenKind::If,
        "else" => TokenKind::Else,
        "while" => TokenKind::While,
        "for" => TokenKind::For,
        "return" => TokenKind::Return,
        "mem" => TokenKind::Mem,
        "mem_xchg" => TokenKind::MemXchg,
        _ => return None,
    })
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn span_from(&self, start: usize, line: u32, col: u32) -> Span {
        Span::new(start, self.pos, line, col)
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) {
        // Columns count characters, not bytes.
        let ch = self.src[self.pos..].chars().next().unwrap();
        self.pos += ch.len_utf8();
        if ch == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32, col: u32) {
        let span = self.span_from(start, line, col);
        self.tokens.push(Token { kind, text: self.src[start..self.pos].to_string(), span });
    }

    fn line_prefix_is_blank(&self, at: usize) -> bool {
        let line_start = self.src[..at].rfind('\n').map_or(0, |i| i + 1);
        self.src[line_start..at].chars().all(char::is_whitespace)
    }

    fn lex_pragma(&mut self, start: usize, line: u32, col: u32) -> Result<(), Diagnostic> {
        let line_end = self.src[start..].find('\n').map_or(self.src.len(), |i| start + i);
        let directive = self.src[start..line_end].trim_end();
        let lowered = directive.to_ascii_lowercase();
        let words: Vec<&str> = lowered[1..].split_whitespace().collect();
        let ok = words == ["pragma", "bombyx", "dae"] && self.line_prefix_is_blank(start);
        let end = start + directive.len();
        while self.pos < end {
            self.bump();
        }
        if !ok {
            return Err(Diagnostic::at(
                DiagnosticKind::MalformedPragma,
                format!("unsupported directive `{directive}`; only `#pragma bombyx dae` on its own line is recognised"),
                self.span_from(start, line, col),
            ));
        }
        self.push(TokenKind::PragmaDae, start, line, col);
        Ok(())
    }

    fn lex_number(&mut self, start: usize, line: u32, col: u32) -> Result<(), Diagnostic> {
        while matches!(self.peek(0), Some(b'0'..=b'9')) {
            self.bump();
        }
        if matches!(self.peek(0), Some(c) if c.is_ascii_alphabetic() || c == b'_') {
            while matches!(self.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.bump();
            }
            return Err(Diagnostic::at(
                DiagnosticKind::MalformedInteger,
                format!("malformed integer literal `{}`", &self.src[start..self.pos]),
                self.span_from(start, line, col),
            ));
        }
        let text = &self.src[start..self.pos];
        match text.parse::<i64>() {
            Ok(v) => {
                self.push(TokenKind::Int(v), start, line, col);
                Ok(())
            }
            Err(_) => Err(Diagnostic::at(
                DiagnosticKind::IntegerOverflow,
                format!("integer literal `{text}` does not fit in 64-bit signed range"),
                self.span_from(start, line, col),
            )),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        while let Some(c) = self.peek(0) {
            let (start, line, col) = (self.pos, self.line, self.col);
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => self.bump(),
                b'/' if self.peek(1) == Some(b'/') => {
                    while !matches!(self.peek(0), None | Some(b'\n')) {
                        self.bump();
                    }
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek(0) {
                            None => {
                                return Err(Diagnostic::at(
                                    DiagnosticKind::UnterminatedComment,
                                    "unterminated block comment",
                                    self.span_from(start, line, col),
                                ))
                            }
                            Some(b'*') if self.peek(1) == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            _ => self.bump(),
                        }
                    }
                }
                b'#' => self.lex_pragma(start, line, col)?,
                b'0'..=b'9' => self.lex_number(start, line, col)?,
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while matches!(self.peek(0), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    let kind = keyword(&self.src[start..self.pos]).unwrap_or(TokenKind::Ident);
                    self.push(kind, start, line, col);
                }
                _ => {
                    let two = |a: u8, b: u8| c == a && self.peek(1) == Some(b);
                    let (kind, len) = if two(b'=', b'=') {
                        (TokenKind::EqEq, 2)
                    } else if two(b'!', b'=') {
                        (TokenKind::NotEq, 2)
                    } else if two(b'<', b'=') {
                        (TokenKind::Le, 2)
                    } else if two(b'>', b'=') {
                        (TokenKind::Ge, 2)
                    } else if two(b'&', b'&') {
                        (TokenKind::AndAnd, 2)
                    } else if two(b'|', b'|') {
                        (TokenKind::OrOr, 2)
                    } else {
                        let kind = match c {
                            b'(' => TokenKind::LParen,
                            b')' => TokenKind::RParen,
                            b'{' => TokenKind::LBrace,
                            b'}' => TokenKind::RBrace,
                            b'[' => TokenKind::LBracket,
                            b']' => TokenKind::RBracket,
                            b',' => TokenKind::Comma,
                            b';' => TokenKind::Semicolon,
                            b'=' => TokenKind::Assign,
                            b'+' => TokenKind::Plus,
                            b'-' => TokenKind::Minus,
                            b'*' => TokenKind::Star,
                            b'/' => TokenKind::Slash,
                            b'%' => TokenKind::Percent,
                            b'<' => TokenKind::Lt,
                            b'>' => TokenKind::Gt,
                            b'!' => TokenKind::Bang,
                            _ => {
                                self.bump();
                                let text = &self.src[start..self.pos];
                                return Err(Diagnostic::at(
                                    DiagnosticKind::IllegalCharacter,
                                    format!("illegal character `{}`", text.escape_debug()),
                                    self.span_from(start, line, col),
                                ));
                            }
                        };
                        (kind, 1)
                    };
                    for _ in 0..len {
                        self.bump();
                    }
                    self.push(kind, start, line, col);
                }
            }
        }
        Ok(self.tokens)
    }
}

/// Splits `source` into tokens, or returns the first lexical error.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer { src: source, bytes: source.as_bytes(), pos: 0, line: 1, col: 1, tokens: Vec::new() }.run()
}
