use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::frontend::{Diagnostic, DiagnosticKind};
use crate::implicit_ir::{
    compute_liveness, BlockId, FunctionOrigin, ImplicitFunction, ImplicitProgram, IrStmtKind, LivenessFacts, Terminator,
};

/// Where a closure declaration is placed: before statement `index` of `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeclPoint {
    pub block: BlockId,
    pub index: usize,
}

/// Immediate dominators (Cooper, Harvey and Kennedy); `None` for
/// unreachable blocks, the entry maps to itself.
fn immediate_dominators(f: &ImplicitFunction) -> Vec<Option<BlockId>> {
    let rpo = f.reverse_postorder();
    let mut rank = vec![usize::MAX; f.blocks.len()];
    for (i, b) in rpo.iter().enumerate() {
        rank[*b] = i;
    }
    let preds = f.predecessors();
    let mut idom: Vec<Option<BlockId>> = vec![None; f.blocks.len()];
    idom[f.entry] = Some(f.entry);
    let intersect = |idom: &[Option<BlockId>], mut a: BlockId, mut b: BlockId| {
        while a != b {
            while rank[a] > rank[b] {
                a = idom[a].unwrap();
            }
            while rank[b] > rank[a] {
                b = idom[b].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new = None;
            for &p in &preds[b] {
                if idom[p].is_some() {
                    new = Some(match new {
                        None => p,
                        Some(n) => intersect(&idom, p, n),
                    });
                }
            }
            if new.is_some() && idom[b] != new {
                idom[b] = new;
                changed = true;
            }
        }
    }
    idom
}

fn dominator_chain(idom: &[Option<BlockId>], mut b: BlockId) -> Vec<BlockId> {
    let mut chain = vec![b];
    while let Some(d) = idom[b] {
        if d == b {
            break;
        }
        chain.push(d);
        b = d;
    }
    chain
}

fn nearest_common_dominator(idom: &[Option<BlockId>], blocks: &[BlockId]) -> BlockId {
    let mut common: Vec<BlockId> = dominator_chain(idom, blocks[0]);
    for &b in &blocks[1..] {
        let chain: BTreeSet<BlockId> = dominator_chain(idom, b).into_iter().collect();
        common.retain(|d| chain.contains(d));
    }
    common[0]
}

/// Checks that every path leaving the declaration point reaches `sync`
/// before the task could end.
fn closure_escapes(f: &ImplicitFunction, decl: BlockId, sync: BlockId) -> bool {
    let mut seen = vec![false; f.blocks.len()];
    let mut stack = vec![decl];
    while let Some(b) = stack.pop() {
        if b == sync {
            continue;
        }
        if std::mem::replace(&mut seen[b], true) {
            continue;
        }
        match &f.block(b).terminator {
            Terminator::Return(_) | Terminator::Sync(_) => return true,
            t => stack.extend(t.successors()),
        }
    }
    false
}

struct Boundary {
    sync: BlockId,
    handle: String,
    decl: DeclPoint,
    layout: ClosureLayout,
}

fn convert_terminator(t: &Terminator) -> ExTerminator {
    match t {
        Terminator::If { cond, then_block, else_block, merge } => ExTerminator::If {
            cond: cond.clone(),
            then_block: *then_block,
            else_block: *else_block,
            merge: *merge,
        },
        Terminator::Goto(b) => ExTerminator::Goto(*b),
        Terminator::While { cond, body, exit } => ExTerminator::While { cond: cond.clone(), body: *body, exit: *exit },
        Terminator::Return(e) => ExTerminator::Return(e.clone()),
        Terminator::Sync(_) => unreachable!("syncs are converted by the caller"),
    }
}

/// Converts one implicit function into its task functions: the function
/// itself followed by its continuations in path order.
pub fn lower_function(f: &ImplicitFunction) -> Result<Vec<ExplicitTaskFunction>, Vec<Diagnostic>> {
    let facts: LivenessFacts = compute_liveness(f)?;
    let paths = partition_paths(f).map_err(|d| vec![d])?;
    let elided = elided_syncs(f);
    let idom = immediate_dominators(f);
    let start_index: BTreeMap<BlockId, usize> = paths.iter().map(|p| (p.entry, p.index)).collect();
    let mut diags = Vec::new();

    // Which sync each spawn belongs to.
    let mut site_sync: BTreeMap<(BlockId, usize), BlockId> = BTreeMap::new();
    let mut site_count: BTreeMap<(BlockId, usize), usize> = BTreeMap::new();
    for (&sync, sf) in &facts.syncs {
        for &site in &sf.spawn_sites {
            site_sync.insert(site, sync);
            *site_count.entry(site).or_default() += 1;
        }
    }
    for b in &f.blocks {
        for (i, s) in b.stmts.iter().enumerate().filter(|(_, s)| s.kind.is_spawn()) {
            match site_count.get(&(b.id, i)).copied().unwrap_or(0) {
                1 => {}
                0 => diags.push(Diagnostic::at(
                    DiagnosticKind::ClosureEscapes,
                    format!("spawn in `{}` (block b{}) is never synchronized", f.name, b.id),
                    s.span,
                )),
                _ => diags.push(Diagnostic::at(
                    DiagnosticKind::SpawnReachesMultipleSyncs,
                    format!("spawn in `{}` (block b{}) can reach more than one sync", f.name, b.id),
                    s.span,
                )),
            }
        }
    }

    let mut boundaries: BTreeMap<BlockId, Boundary> = BTreeMap::new();
    for path in &paths {
        for &sync in &path.boundaries {
            let Terminator::Sync(next) = f.block(sync).terminator else { unreachable!() };
            let k = start_index[&next] - 1;
            let continuation = format!("{}__cont{k}", f.name);
            let sites = &facts.syncs[&sync].spawn_sites;
            let mut members: Vec<BlockId> = sites.iter().map(|(b, _)| *b).collect();
            members.push(sync);
            let mut block = nearest_common_dominator(&idom, &members);
            while f.block(block).loop_depth > 0 {
                block = idom[block].expect("loop blocks have a dominator");
            }
            let index = sites
                .iter()
                .filter(|(b, _)| *b == block)
                .map(|(_, i)| *i)
                .min()
                .unwrap_or(f.block(block).stmts.len());
            let decl = DeclPoint { block, index };
            if closure_escapes(f, block, sync) {
                diags.push(Diagnostic::new(
                    DiagnosticKind::ClosureEscapes,
                    format!("closure for `{continuation}` declared in b{block} can leave `{}` without reaching its sync", f.name),
                    None,
                ));
            }
            let layout = synthesize_closure(f, &facts, sync, &continuation, &decl);
            boundaries.insert(sync, Boundary { sync, handle: format!("c{k}"), decl, layout });
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let dest_of = |block: BlockId, index: usize, var: Option<&String>| -> SpawnDest {
        let sync = site_sync[&(block, index)];
        if elided.contains(&sync) {
            return SpawnDest::Parent;
        }
        let handle = boundaries[&sync].handle.clone();
        match var {
            Some(v) => SpawnDest::Field { handle, field: v.clone() },
            None => SpawnDest::Counter { handle },
        }
    };

    let mut tasks = Vec::new();
    for path in &paths {
        let mut blocks = Vec::new();
        for &id in &path.blocks {
            let src = f.block(id);
            let mut stmts: Vec<ExStmt> = src
                .stmts
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let kind = match &s.kind {
                        IrStmtKind::Let { name, value } => ExStmtKind::Let { name: name.clone(), value: value.clone() },
                        IrStmtKind::Assign { name, value } => {
                            ExStmtKind::Assign { name: name.clone(), value: value.clone() }
                        }
                        IrStmtKind::MemStore { addr, value } => {
                            ExStmtKind::MemStore { addr: addr.clone(), value: value.clone() }
                        }
                        IrStmtKind::SpawnAssign { dest, callee, args } => ExStmtKind::SpawnTask {
                            callee: callee.clone(),
                            args: args.clone(),
                            dest: dest_of(id, i, Some(dest)),
                        },
                        IrStmtKind::SpawnVoid { callee, args } => {
                            ExStmtKind::SpawnTask { callee: callee.clone(), args: args.clone(), dest: dest_of(id, i, None) }
                        }
                    };
                    ExStmt { kind, span: s.span }
                })
                .collect();
            // Insert declarations back to front so earlier indices stay valid;
            // ties keep boundary order.
            let mut decls: Vec<&Boundary> = boundaries.values().filter(|b| b.decl.block == id).collect();
            decls.sort_by_key(|b| b.decl.index);
            for b in decls.into_iter().rev() {
                let span = src.stmts.get(b.decl.index).map(|s| s.span).unwrap_or_default();
                stmts.insert(
                    b.decl.index,
                    ExStmt { kind: ExStmtKind::DeclareClosure { handle: b.handle.clone(), layout: b.layout.clone() }, span },
                );
            }
            let terminator = match &src.terminator {
                Terminator::Sync(next) => match boundaries.get(&id) {
                    Some(b) => ExTerminator::SpawnNext { handle: b.handle.clone() },
                    None => ExTerminator::Goto(*next),
                },
                t => convert_terminator(t),
            };
            blocks.push(ExBlock { id, stmts, terminator });
        }
        let (name, kind, params) = if path.index == 0 {
            let kind = if f.origin == FunctionOrigin::DaeAccess { TaskKind::Access } else { TaskKind::Function };
            (f.name.clone(), kind, f.params.clone())
        } else {
            let sync = boundaries.values().find(|b| f.block(b.sync).terminator == Terminator::Sync(path.entry)).unwrap();
            (sync.layout.continuation.clone(), TaskKind::Continuation, sync.layout.params())
        };
        tasks.push(ExplicitTaskFunction {
            name,
            kind,
            params,
            returns_value: f.returns_value,
            blocks,
            entry: path.entry,
            origin: f.name.clone(),
        });
    }
    Ok(tasks)
}

/// Lowers every function; tasks keep the program's function order with each
/// function's continuations right after it.
pub fn lower_program(p: &ImplicitProgram) -> Result<ExplicitSystem, Vec<Diagnostic>> {
    let mut tasks = Vec::new();
    let mut diags = Vec::new();
    for f in &p.functions {
        match lower_function(f) {
            Ok(t) => tasks.extend(t),
            Err(d) => diags.extend(d),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(ExplicitSystem { tasks, entry: p.entry.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::build_program;

    fn lower(src: &str) -> ExplicitSystem {
        lower_program(&build_program(&compile_source(src, None).unwrap())).unwrap()
    }

    const FIB: &str = "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }";

    #[test]
    fn fibonacci_lowers_to_two_tasks() {
        let s = lower(FIB);
        let names: Vec<&str> = s.tasks.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["fib", "fib__cont0"]);
        let fib = &s.tasks[0];
        let b2 = fib.block(2);
        assert!(matches!(&b2.stmts[0].kind, ExStmtKind::DeclareClosure { handle, .. } if handle == "c0"));
        assert!(matches!(
            &b2.stmts[1].kind,
            ExStmtKind::SpawnTask { dest: SpawnDest::Field { field, .. }, .. } if field == "x"
        ));
        assert_eq!(b2.terminator, ExTerminator::SpawnNext { handle: "c0".into() });
        let layout = fib.closure_layout("c0").unwrap();
        assert_eq!(layout.join, JoinPolicy::Static(2));
        assert_eq!(layout.padded_bits, 256);
        assert_eq!(s.tasks[1].params, vec!["x", "y"]);
        assert_eq!(s.tasks[1].kind, TaskKind::Continuation);
    }

    #[test]
    fn conditional_spawns_use_dynamic_join() {
        let s = lower(
            "task i64 f(i64 n) { let a = 0; if (n > 3) { a = spawn f(n - 1); } sync; return a + n; }",
        );
        let f = &s.tasks[0];
        let (_, layout) = f.declared_closures()[0];
        assert_eq!(layout.join, JoinPolicy::Dynamic);
        assert_eq!(layout.placeholders, vec!["a"]);
        assert_eq!(layout.ready_args, vec!["n"]);
        // Declared in the entry block, ahead of the branch.
        assert!(matches!(f.block(0).stmts.last().unwrap().kind, ExStmtKind::DeclareClosure { .. }));
    }

    #[test]
    fn loop_spawns_declare_before_loop() {
        let s = lower(
            "task void w(i64 a) { mem[a] = 1; }
             task i64 f(i64 k) { let i = 0; while (i < k) { spawn w(i); i = i + 1; } sync; return k; }",
        );
        let f = s.task("f").unwrap();
        let (_, layout) = f.declared_closures()[0];
        assert_eq!(layout.join, JoinPolicy::Dynamic);
        assert!(matches!(f.block(0).stmts[1].kind, ExStmtKind::DeclareClosure { .. }));
    }

    #[test]
    fn trailing_void_sync_forwards_to_parent() {
        let s = lower("task void t(i64 n) { if (n > 0) { spawn t(n - 1); spawn t(n - 1); } }");
        assert_eq!(s.tasks.len(), 1);
        let spawns: Vec<&SpawnDest> = s.tasks[0]
            .blocks
            .iter()
            .flat_map(|b| &b.stmts)
            .filter_map(|st| match &st.kind {
                ExStmtKind::SpawnTask { dest, .. } => Some(dest),
                _ => None,
            })
            .collect();
        assert_eq!(spawns, vec![&SpawnDest::Parent, &SpawnDest::Parent]);
    }

    #[test]
    fn sync_in_one_branch_makes_paths_overlap() {
        let p = build_program(
            &compile_source(
                "task i64 f(i64 n) { let a = 0; if (n > 3) { a = spawn f(n - 1); sync; } return a; }",
                None,
            )
            .unwrap(),
        );
        let diags = lower_program(&p).unwrap_err();
        assert_eq!(diags[0].kind, DiagnosticKind::PathsOverlap);
    }
}
