use std::fmt;

/// Byte range plus the 1-based line/column of its first byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, column: u32) -> Self {
        Span { start, end, line, column }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        if other.end <= self.start {
            return Span { start: other.start, end: self.end, line: other.line, column: other.column };
        }
        Span { end: other.end.max(self.end), ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    // lexical
    UnterminatedComment,
    IllegalCharacter,
    MalformedInteger,
    IntegerOverflow,
    MalformedPragma,
    // syntactic
    Syntax,
    SpawnOutsideFunction,
    SpawnInExpression,
    NestedDaePragma,
    // semantic
    DuplicateFunction,
    DuplicateParameter,
    UnknownEntry,
    UnresolvedName,
    UnresolvedSpawnTarget,
    ArityMismatch,
    SpawnOfNonTask,
    VoidSpawnResult,
    Redeclaration,
    ReturnValueInVoid,
    MissingReturnValue,
    MissingReturn,
    UnreachableCode,
    SyncInLoop,
    SpawnResultInLoop,
    PendingResultUse,
    DaeRequiresMemoryAccess,
    DaeTarget,
    DaeInLoop,
    // IR / lowering
    PossiblyUndefined,
    SpawnReachesMultipleSyncs,
    ClosureEscapes,
    PathsOverlap,
}

impl DiagnosticKind {
    pub fn code(self) -> &'static str {
        use DiagnosticKind::*;
        match self {
            UnterminatedComment => "unterminated-comment",
            IllegalCharacter => "illegal-character",
            MalformedInteger => "malformed-integer",
            IntegerOverflow => "integer-overflow",
            MalformedPragma => "malformed-pragma",
            Syntax => "syntax",
            SpawnOutsideFunction => "spawn-outside-function",
            SpawnInExpression => "spawn-in-expression",
            NestedDaePragma => "nested-dae-pragma",
            DuplicateFunction => "duplicate-function",
            DuplicateParameter => "duplicate-parameter",
            UnknownEntry => "unknown-entry",
            UnresolvedName => "unresolved-name",
            UnresolvedSpawnTarget => "unresolved-spawn-target",
            ArityMismatch => "arity-mismatch",
            SpawnOfNonTask => "spawn-of-non-task",
            VoidSpawnResult => "void-spawn-result",
            Redeclaration => "redeclaration",
            ReturnValueInVoid => "return-value-in-void",
            MissingReturnValue => "missing-return-value",
            MissingReturn => "missing-return",
            UnreachableCode => "unreachable-code",
            SyncInLoop => "sync-in-loop",
            SpawnResultInLoop => "spawn-result-in-loop",
            PendingResultUse => "pending-result-use",
            DaeRequiresMemoryAccess => "dae-requires-memory-access",
            DaeTarget => "dae-target",
            DaeInLoop => "dae-in-loop",
            PossiblyUndefined => "possibly-undefined",
            SpawnReachesMultipleSyncs => "spawn-reaches-multiple-syncs",
            ClosureEscapes => "closure-escapes",
            PathsOverlap => "paths-overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("error[{}]: {message}", kind.code())]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>, span: Option<Span>) -> Self {
        Diagnostic { kind, message: message.into(), span }
    }

    pub fn at(kind: DiagnosticKind, message: impl Into<String>, span: Span) -> Self {
        Self::new(kind, message, Some(span))
    }

    /// Renders `file:line:col: error[code]: message`.
    pub fn render(&self, file: &str) -> String {
        match self.span {
            Some(s) => format!("{file}:{}:{}: {self}", s.line, s.column),
            None => format!("{file}: {self}"),
        }
    }
}

/// A batch of diagnostics, as returned by passes that report everything they find.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}
