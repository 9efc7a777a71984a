//! Conversion from the implicit (fork-join) IR to the explicit
//! continuation-passing IR.
//!
//! Each function is cut at its `sync` terminators into paths. Every path
//! becomes a terminating task function: the first keeps the function's
//! name, later ones become `<fn>__cont<k>`. At a cut the spawning path
//! declares a closure for the continuation, addresses each spawn at a
//! closure field, and ends with `spawn_next`.
//!
//! A trailing `sync; return;` in a void function is not cut: the children
//! instead report to the function's own return destination (`-> parent`),
//! each spawn adding one to that destination's join count.

mod closure;
mod dump;
mod lower;
mod paths;
mod relations;

pub use closure::{padded_bits_for, synthesize_closure, ClosureField, ClosureLayout, FieldRole, JoinPolicy};
pub use dump::{dump_system, dump_task};
pub use lower::{lower_function, lower_program, DeclPoint};
pub use paths::{elided_syncs, partition_paths, Path};
pub use relations::{analyze_relations, SystemRelations, TaskRelations};

use crate::frontend::{Expr, Span};
use crate::implicit_ir::BlockId;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpawnDest {
    /// Value is written into placeholder `field` of the closure bound to `handle`.
    Field { handle: String, field: String },
    /// Child only counts toward the closure's join.
    Counter { handle: String },
    /// Child reports to the spawning task's own return destination.
    Parent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExStmtKind {
    Let { name: String, value: Expr },
    Assign { name: String, value: Expr },
    MemStore { addr: Expr, value: Expr },
    DeclareClosure { handle: String, layout: ClosureLayout },
    SpawnTask { callee: String, args: Vec<Expr>, dest: SpawnDest },
}

impl ExStmtKind {
    pub fn operands(&self) -> Vec<&Expr> {
        match self {
            ExStmtKind::Let { value, .. } | ExStmtKind::Assign { value, .. } => vec![value],
            ExStmtKind::MemStore { addr, value } => vec![addr, value],
            ExStmtKind::SpawnTask { args, .. } => args.iter().collect(),
            ExStmtKind::DeclareClosure { .. } => vec![],
        }
    }

    pub fn memory_ops(&self) -> usize {
        let stores = usize::from(matches!(self, ExStmtKind::MemStore { .. }));
        stores + self.operands().iter().map(|e| e.memory_ops()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExStmt {
    pub kind: ExStmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExTerminator {
    If { cond: Expr, then_block: BlockId, else_block: BlockId, merge: Option<BlockId> },
    Goto(BlockId),
    While { cond: Expr, body: BlockId, exit: BlockId },
    Return(Option<Expr>),
    /// Issues the closure bound to `handle`; ends the task.
    SpawnNext { handle: String },
}

impl ExTerminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            ExTerminator::If { then_block, else_block, .. } => vec![*then_block, *else_block],
            ExTerminator::Goto(b) => vec![*b],
            ExTerminator::While { body, exit, .. } => vec![*body, *exit],
            ExTerminator::Return(_) | ExTerminator::SpawnNext { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExBlock {
    pub id: BlockId,
    pub stmts: Vec<ExStmt>,
    pub terminator: ExTerminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    /// First path of a source function.
    Function,
    /// Code after a sync.
    Continuation,
    /// Memory-access task produced by the DAE pass.
    Access,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitTaskFunction {
    pub name: String,
    pub kind: TaskKind,
    /// For continuations: ready arguments followed by placeholders.
    pub params: Vec<String>,
    pub returns_value: bool,
    /// Sorted by block id; ids are those of the implicit function.
    pub blocks: Vec<ExBlock>,
    pub entry: BlockId,
    /// Source function this task was cut from.
    pub origin: String,
}

impl ExplicitTaskFunction {
    pub fn block(&self, id: BlockId) -> &ExBlock {
        let i = self.blocks.binary_search_by_key(&id, |b| b.id).expect("block belongs to task");
        &self.blocks[i]
    }

    /// Closures declared by this task, in block order.
    pub fn declared_closures(&self) -> Vec<(&str, &ClosureLayout)> {
        self.blocks
            .iter()
            .flat_map(|b| b.stmts.iter())
            .filter_map(|s| match &s.kind {
                ExStmtKind::DeclareClosure { handle, layout } => Some((handle.as_str(), layout)),
                _ => None,
            })
            .collect()
    }

    pub fn closure_layout(&self, handle: &str) -> Option<&ClosureLayout> {
        self.declared_closures().into_iter().find(|(h, _)| *h == handle).map(|(_, l)| l)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitSystem {
    pub tasks: Vec<ExplicitTaskFunction>,
    pub entry: String,
}

impl ExplicitSystem {
    pub fn task(&self, name: &str) -> Option<&ExplicitTaskFunction> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }

    /// Layout of every continuation, keyed by continuation name.
    pub fn closure_layouts(&self) -> std::collections::BTreeMap<String, ClosureLayout> {
        self.tasks
            .iter()
            .flat_map(|t| t.declared_closures())
            .map(|(_, l)| (l.continuation.clone(), l.clone()))
            .collect()
    }
}
