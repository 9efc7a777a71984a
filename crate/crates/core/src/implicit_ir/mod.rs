//! Implicit IR: one control-flow graph per function, with high-level
//! terminators (`if`, `while`, `return`, `sync`) kept intact so the original
//! program structure can be re-emitted as C.

mod build;
mod dump;
mod liveness;

pub use build::{build_cfg, build_program};
pub use dump::{dump_function, dump_program};
pub use liveness::{collect_spawn_sites, compute_liveness, LivenessFacts, SpawnSite, SyncFacts};

use crate::frontend::{Expr, Span};

pub type BlockId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrStmtKind {
    Let { name: String, value: Expr },
    Assign { name: String, value: Expr },
    SpawnAssign { dest: String, callee: String, args: Vec<Expr> },
    SpawnVoid { callee: String, args: Vec<Expr> },
    MemStore { addr: Expr, value: Expr },
}

impl IrStmtKind {
    /// Variable written by the statement, if any.
    pub fn defined(&self) -> Option<&str> {
        match self {
            IrStmtKind::Let { name, .. } | IrStmtKind::Assign { name, .. } => Some(name),
            IrStmtKind::SpawnAssign { dest, .. } => Some(dest),
            IrStmtKind::SpawnVoid { .. } | IrStmtKind::MemStore { .. } => None,
        }
    }

    /// Expressions evaluated by the statement, in evaluation order.
    pub fn operands(&self) -> Vec<&Expr> {
        match self {
            IrStmtKind::Let { value, .. } | IrStmtKind::Assign { value, .. } => vec![value],
            IrStmtKind::SpawnAssign { args, .. } | IrStmtKind::SpawnVoid { args, .. } => args.iter().collect(),
            IrStmtKind::MemStore { addr, value } => vec![addr, value],
        }
    }

    /// Variables read, in first-occurrence order.
    pub fn uses(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in self.operands() {
            e.collect_vars(&mut out);
        }
        out
    }

    pub fn memory_ops(&self) -> usize {
        let stores = usize::from(matches!(self, IrStmtKind::MemStore { .. }));
        stores + self.operands().iter().map(|e| e.memory_ops()).sum::<usize>()
    }

    pub fn is_spawn(&self) -> bool {
        matches!(self, IrStmtKind::SpawnAssign { .. } | IrStmtKind::SpawnVoid { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrStmt {
    pub kind: IrStmtKind,
    /// Marked by a DAE pragma and not yet split out.
    pub dae: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    /// `merge` is the block both arms fall through to, when either does.
    If { cond: Expr, then_block: BlockId, else_block: BlockId, merge: Option<BlockId> },
    Goto(BlockId),
    /// Loop header: `body` runs while `cond` holds, then control moves to `exit`.
    While { cond: Expr, body: BlockId, exit: BlockId },
    Return(Option<Expr>),
    Sync(BlockId),
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::If { then_block, else_block, .. } => vec![*then_block, *else_block],
            Terminator::Goto(b) | Terminator::Sync(b) => vec![*b],
            Terminator::While { body, exit, .. } => vec![*body, *exit],
            Terminator::Return(_) => vec![],
        }
    }

    pub fn uses(&self) -> Vec<String> {
        match self {
            Terminator::If { cond, .. } | Terminator::While { cond, .. } => cond.vars(),
            Terminator::Return(Some(e)) => e.vars(),
            Terminator::Goto(_) | Terminator::Sync(_) | Terminator::Return(None) => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub stmts: Vec<IrStmt>,
    pub terminator: Terminator,
    /// Number of enclosing loops; a loop header counts its own loop.
    pub loop_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionOrigin {
    Source,
    /// Memory-access task split out of the named function by the DAE pass.
    DaeAccess,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicitFunction {
    pub name: String,
    pub params: Vec<String>,
    pub returns_value: bool,
    pub is_task: bool,
    /// Indexed by block id.
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
    pub origin: FunctionOrigin,
}

impl ImplicitFunction {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id]
    }

    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for b in &self.blocks {
            for s in b.terminator.successors() {
                preds[s].push(b.id);
            }
        }
        preds
    }

    /// Blocks in reverse post-order from the entry.
    pub fn reverse_postorder(&self) -> Vec<BlockId> {
        let mut seen = vec![false; self.blocks.len()];
        let mut order = Vec::with_capacity(self.blocks.len());
        let mut stack = vec![(self.entry, 0usize)];
        seen[self.entry] = true;
        while let Some((b, i)) = stack.pop() {
            let succs = self.blocks[b].terminator.successors();
            if i < succs.len() {
                stack.push((b, i + 1));
                let s = succs[i];
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(b);
            }
        }
        order.reverse();
        order
    }

    pub fn sync_blocks(&self) -> Vec<BlockId> {
        self.blocks.iter().filter(|b| matches!(b.terminator, Terminator::Sync(_))).map(|b| b.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicitProgram {
    pub functions: Vec<ImplicitFunction>,
    pub entry: String,
}

impl ImplicitProgram {
    pub fn function(&self, name: &str) -> Option<&ImplicitFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}
