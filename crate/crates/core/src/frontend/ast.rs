use super::diagnostic::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// C binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    MemLoad(Box<Expr>),
    MemXchg(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Free variables in first-occurrence order, without duplicates.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Binary(_, a, b) | Expr::MemXchg(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Unary(_, a) | Expr::MemLoad(a) => a.collect_vars(out),
        }
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    /// Number of memory operations (loads and exchanges) the expression performs.
    pub fn memory_ops(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Var(_) => 0,
            Expr::Binary(_, a, b) => a.memory_ops() + b.memory_ops(),
            Expr::Unary(_, a) => a.memory_ops(),
            Expr::MemLoad(a) => 1 + a.memory_ops(),
            Expr::MemXchg(a, b) => 1 + a.memory_ops() + b.memory_ops(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnType {
    I64,
    Void,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Let { name: String, value: Expr },
    Assign { name: String, value: Expr },
    /// `x = spawn f(..)`; `declare` is set for the `let x = spawn f(..)` form.
    SpawnAssign { dest: String, declare: bool, callee: String, args: Vec<Expr> },
    SpawnVoid { callee: String, args: Vec<Expr> },
    Sync,
    If { cond: Expr, then_block: Block, else_block: Block },
    While { cond: Expr, body: Block },
    Return(Option<Expr>),
    MemStore { addr: Expr, value: Expr },
    DaePragma(Box<Stmt>),
}

/// Statement with its source span. Equality ignores the span so that ASTs
/// reparsed from pretty-printed text compare equal.
#[derive(Debug, Clone, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }
}

#[derive(Debug, Clone, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: ReturnType,
    pub body: Block,
    pub is_task: bool,
    pub span: Span,
}

impl PartialEq for FunctionDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.return_type == other.return_type
            && self.body == other.body
            && self.is_task == other.is_task
    }
}

impl FunctionDecl {
    pub fn returns_value(&self) -> bool {
        self.return_type == ReturnType::I64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDecl>,
    /// Root task; `main` when declared, otherwise the first function.
    pub entry: String,
}

impl Program {
    pub fn new(functions: Vec<FunctionDecl>) -> Self {
        let entry = if functions.iter().any(|f| f.name == "main") {
            "main".to_string()
        } else {
            functions.first().map(|f| f.name.clone()).unwrap_or_default()
        };
        Program { functions, entry }
    }

    pub fn with_entry(mut self, entry: impl Into<String>) -> Self {
        self.entry = entry.into();
        self
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }
}
