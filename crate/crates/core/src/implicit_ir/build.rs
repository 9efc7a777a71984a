use super::*;
use crate::frontend::{FunctionDecl, Program, Stmt, StmtKind};

struct Builder {
    blocks: Vec<(Vec<IrStmt>, Option<Terminator>, usize)>,
}

impl Builder {
    fn new_block(&mut self, loop_depth: usize) -> BlockId {
        self.blocks.push((Vec::new(), None, loop_depth));
        self.blocks.len() - 1
    }

    fn terminate(&mut self, b: BlockId, t: Terminator) {
        debug_assert!(self.blocks[b].1.is_none(), "block b{b} terminated twice");
        self.blocks[b].1 = Some(t);
    }

    fn push(&mut self, b: BlockId, s: &Stmt, dae: bool) {
        let kind = match &s.kind {
            StmtKind::Let { name, value } => IrStmtKind::Let { name: name.clone(), value: value.clone() },
            StmtKind::Assign { name, value } => IrStmtKind::Assign { name: name.clone(), value: value.clone() },
            StmtKind::SpawnAssign { dest, callee, args, .. } => {
                IrStmtKind::SpawnAssign { dest: dest.clone(), callee: callee.clone(), args: args.clone() }
            }
            StmtKind::SpawnVoid { callee, args } => IrStmtKind::SpawnVoid { callee: callee.clone(), args: args.clone() },
            StmtKind::MemStore { addr, value } => IrStmtKind::MemStore { addr: addr.clone(), value: value.clone() },
            other => unreachable!("not a straight-line statement: {other:?}"),
        };
        self.blocks[b].0.push(IrStmt { kind, dae, span: s.span });
    }

    /// Lowers `stmts` starting in `cur`; returns the block control falls out
    /// of, or `None` when every path returned.
    fn lower(&mut self, stmts: &[Stmt], mut cur: BlockId, depth: usize) -> Option<BlockId> {
        for s in stmts {
            match &s.kind {
                StmtKind::Let { .. }
                | StmtKind::Assign { .. }
                | StmtKind::SpawnAssign { .. }
                | StmtKind::SpawnVoid { .. }
                | StmtKind::MemStore { .. } => self.push(cur, s, false),
                StmtKind::DaePragma(inner) => self.push(cur, inner, true),
                StmtKind::Sync => {
                    let next = self.new_block(depth);
                    self.terminate(cur, Terminator::Sync(next));
                    cur = next;
                }
                StmtKind::Return(value) => {
                    self.terminate(cur, Terminator::Return(value.clone()));
                    return None;
                }
                StmtKind::If { cond, then_block, else_block } => {
                    let then_id = self.new_block(depth);
                    let then_end = self.lower(then_block, then_id, depth);
                    let (else_id, else_end) = if else_block.is_empty() {
                        (None, None)
                    } else {
                        let id = self.new_block(depth);
                        (Some(id), self.lower(else_block, id, depth))
                    };
                    let needs_merge = then_end.is_some() || else_id.is_none() || else_end.is_some();
                    let merge = needs_merge.then(|| self.new_block(depth));
                    for end in [then_end, else_end].into_iter().flatten() {
                        self.terminate(end, Terminator::Goto(merge.unwrap()));
                    }
                    let else_target = else_id.or(merge).unwrap();
                    self.terminate(
                        cur,
                        Terminator::If { cond: cond.clone(), then_block: then_id, else_block: else_target, merge },
                    );
                    cur = merge?;
                }
                StmtKind::While { cond, body } => {
                    let header = self.new_block(depth + 1);
                    self.terminate(cur, Terminator::Goto(header));
                    let body_id = self.new_block(depth + 1);
                    if let Some(end) = self.lower(body, body_id, depth + 1) {
                        self.terminate(end, Terminator::Goto(header));
                    }
                    let exit = self.new_block(depth);
                    self.terminate(header, Terminator::While { cond: cond.clone(), body: body_id, exit });
                    cur = exit;
                }
            }
        }
        Some(cur)
    }
}

/// Builds the CFG of a validated (and sync-normalized) function.
pub fn build_cfg(f: &FunctionDecl) -> ImplicitFunction {
    let mut b = Builder { blocks: Vec::new() };
    let entry = b.new_block(0);
    if let Some(end) = b.lower(&f.body, entry, 0) {
        b.terminate(end, Terminator::Return(None));
    }
    let blocks = b
        .blocks
        .into_iter()
        .enumerate()
        .map(|(id, (stmts, t, loop_depth))| BasicBlock {
            id,
            stmts,
            terminator: t.expect("every block is terminated"),
            loop_depth,
        })
        .collect();
    ImplicitFunction {
        name: f.name.clone(),
        params: f.params.iter().map(|p| p.name.clone()).collect(),
        returns_value: f.returns_value(),
        is_task: f.is_task,
        blocks,
        entry,
        origin: FunctionOrigin::Source,
    }
}

pub fn build_program(p: &Program) -> ImplicitProgram {
    ImplicitProgram { functions: p.functions.iter().map(build_cfg).collect(), entry: p.entry.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;

    const FIB: &str = "task i64 fib(i64 n) {
        if (n < 2) { return n; }
        let x = spawn fib(n - 1);
        let y = spawn fib(n - 2);
        sync;
        return x + y;
    }";

    fn cfg(src: &str) -> ImplicitFunction {
        let p = compile_source(src, None).unwrap();
        build_cfg(&p.functions[0])
    }

    #[test]
    fn fibonacci_has_four_blocks() {
        let f = cfg(FIB);
        assert_eq!(f.blocks.len(), 4);
        assert!(matches!(f.blocks[0].terminator, Terminator::If { then_block: 1, else_block: 2, merge: Some(2), .. }));
        assert!(f.blocks[0].stmts.is_empty());
        assert!(matches!(f.blocks[1].terminator, Terminator::Return(Some(_))));
        assert_eq!(f.blocks[2].stmts.len(), 2);
        assert!(f.blocks[2].stmts.iter().all(|s| matches!(s.kind, IrStmtKind::SpawnAssign { .. })));
        assert_eq!(f.blocks[2].terminator, Terminator::Sync(3));
        assert!(matches!(f.blocks[3].terminator, Terminator::Return(Some(_))));
    }

    #[test]
    fn single_block_function() {
        let f = cfg("task i64 f() { return 0; }");
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].terminator, Terminator::Return(Some(crate::frontend::Expr::Int(0))));
    }

    #[test]
    fn two_syncs_give_two_sync_terminators() {
        let f = cfg("task i64 f(i64 n) { let a = spawn f(n); sync; let b = spawn f(a); sync; return b; }");
        assert_eq!(f.sync_blocks(), vec![0, 1]);
        assert_eq!(f.blocks.len(), 3);
    }

    #[test]
    fn while_has_header_body_and_exit() {
        let f = cfg("void f(i64 k) { let i = 0; while (i < k) { mem[i] = i; i = i + 1; } }");
        assert_eq!(f.blocks[0].terminator, Terminator::Goto(1));
        let Terminator::While { body, exit, .. } = f.blocks[1].terminator else { panic!() };
        assert_eq!((body, exit), (2, 3));
        assert_eq!(f.blocks[2].terminator, Terminator::Goto(1));
        assert_eq!(f.blocks[1].loop_depth, 1);
        assert_eq!(f.blocks[2].loop_depth, 1);
        assert_eq!(f.blocks[3].loop_depth, 0);
        assert_eq!(f.blocks[3].terminator, Terminator::Return(None));
    }

    #[test]
    fn entry_has_no_predecessors_and_all_blocks_reachable() {
        let f = cfg("void f(i64 k) { while (k) { k = k - 1; } if (k) { mem[0] = 1; } else { mem[1] = 1; } }");
        let preds = f.predecessors();
        assert!(preds[f.entry].is_empty());
        assert_eq!(f.reverse_postorder().len(), f.blocks.len());
    }

    #[test]
    fn both_arms_returning_needs_no_merge() {
        let f = cfg("i64 f(i64 a) { if (a) { return 1; } else { return 2; } }");
        assert_eq!(f.blocks.len(), 3);
        assert!(matches!(f.blocks[0].terminator, Terminator::If { merge: None, .. }));
    }
}
