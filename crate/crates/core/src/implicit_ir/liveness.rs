//! Backward liveness, definite-definition checking and per-sync facts.

use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::frontend::{Diagnostic, DiagnosticKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpawnSite {
    pub block: BlockId,
    pub index: usize,
    pub callee: String,
    pub dest: Option<String>,
}

/// Facts about one `sync` terminator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SyncFacts {
    /// Live after the sync, excluding spawn results.
    pub carried: BTreeSet<String>,
    /// Destinations of value spawns that can reach this sync, in spawn order.
    pub pending_results: Vec<String>,
    /// Spawn sites (block, index) that reach this sync with no sync in between.
    pub spawn_sites: Vec<(BlockId, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LivenessFacts {
    pub live_in: Vec<BTreeSet<String>>,
    pub live_out: Vec<BTreeSet<String>>,
    pub syncs: BTreeMap<BlockId, SyncFacts>,
}

/// Every spawn in program order (block id, then statement index).
pub fn collect_spawn_sites(f: &ImplicitFunction) -> Vec<SpawnSite> {
    let mut out = Vec::new();
    for b in &f.blocks {
        for (index, s) in b.stmts.iter().enumerate() {
            match &s.kind {
                IrStmtKind::SpawnAssign { dest, callee, .. } => {
                    out.push(SpawnSite { block: b.id, index, callee: callee.clone(), dest: Some(dest.clone()) })
                }
                IrStmtKind::SpawnVoid { callee, .. } => {
                    out.push(SpawnSite { block: b.id, index, callee: callee.clone(), dest: None })
                }
                _ => {}
            }
        }
    }
    out
}

fn block_use_def(b: &BasicBlock) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut uses = BTreeSet::new();
    let mut defs = BTreeSet::new();
    for s in &b.stmts {
        for v in s.kind.uses() {
            if !defs.contains(&v) {
                uses.insert(v);
            }
        }
        if let Some(d) = s.kind.defined() {
            defs.insert(d.to_string());
        }
    }
    for v in b.terminator.uses() {
        if !defs.contains(&v) {
            uses.insert(v);
        }
    }
    (uses, defs)
}

/// One round of the backward equations applied to `live_in`.
fn liveness_round(
    f: &ImplicitFunction,
    use_def: &[(BTreeSet<String>, BTreeSet<String>)],
    live_in: &[BTreeSet<String>],
) -> (Vec<BTreeSet<String>>, Vec<BTreeSet<String>>) {
    let mut live_out = vec![BTreeSet::new(); f.blocks.len()];
    let mut new_in = live_in.to_vec();
    for b in f.reverse_postorder().into_iter().rev() {
        let out: BTreeSet<String> =
            f.blocks[b].terminator.successors().iter().flat_map(|s| new_in[*s].iter().cloned()).collect();
        let (uses, defs) = &use_def[b];
        let mut inn = uses.clone();
        inn.extend(out.difference(defs).cloned());
        live_out[b] = out;
        new_in[b] = inn;
    }
    (new_in, live_out)
}

/// Sync blocks reachable from the point just after statement `index` of
/// `block` without passing through another sync.
fn syncs_reached(f: &ImplicitFunction, block: BlockId) -> BTreeSet<BlockId> {
    let mut reached = BTreeSet::new();
    let mut seen = vec![false; f.blocks.len()];
    let mut stack = vec![block];
    seen[block] = true;
    while let Some(b) = stack.pop() {
        match &f.blocks[b].terminator {
            Terminator::Sync(_) => {
                reached.insert(b);
            }
            t => {
                for s in t.successors() {
                    if !seen[s] {
                        seen[s] = true;
                        stack.push(s);
                    }
                }
            }
        }
    }
    reached
}

/// Checks that every use is preceded by a definition on all paths.
fn check_definitions(f: &ImplicitFunction) -> Vec<Diagnostic> {
    let all: BTreeSet<String> = f
        .blocks
        .iter()
        .flat_map(|b| b.stmts.iter().filter_map(|s| s.kind.defined().map(str::to_string)))
        .chain(f.params.iter().cloned())
        .collect();
    let preds = f.predecessors();
    let order = f.reverse_postorder();
    let mut defined_out: Vec<BTreeSet<String>> = vec![all.clone(); f.blocks.len()];
    let params: BTreeSet<String> = f.params.iter().cloned().collect();
    let block_in = |b: BlockId, out: &[BTreeSet<String>]| -> BTreeSet<String> {
        if b == f.entry {
            return params.clone();
        }
        let mut it = preds[b].iter();
        let Some(first) = it.next() else { return params.clone() };
        it.fold(out[*first].clone(), |acc, p| acc.intersection(&out[*p]).cloned().collect())
    };
    loop {
        let mut changed = false;
        for &b in &order {
            let mut d = block_in(b, &defined_out);
            for s in &f.blocks[b].stmts {
                if let Some(v) = s.kind.defined() {
                    d.insert(v.to_string());
                }
            }
            if d != defined_out[b] {
                defined_out[b] = d;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut diags = Vec::new();
    for &b in &order {
        let block = &f.blocks[b];
        let mut d = block_in(b, &defined_out);
        let mut report = |v: &str, span| {
            diags.push(Diagnostic::new(
                DiagnosticKind::PossiblyUndefined,
                format!("`{v}` may be used before it is defined in `{}` (block b{b})", f.name),
                span,
            ))
        };
        for s in &block.stmts {
            for v in s.kind.uses() {
                if !d.contains(&v) {
                    report(&v, Some(s.span));
                }
            }
            if let Some(v) = s.kind.defined() {
                d.insert(v.to_string());
            }
        }
        for v in block.terminator.uses() {
            if !d.contains(&v) {
                report(&v, None);
            }
        }
    }
    diags
}

/// Solves liveness to a fixpoint and derives the carried/pending sets at
/// every sync.
pub fn compute_liveness(f: &ImplicitFunction) -> Result<LivenessFacts, Vec<Diagnostic>> {
    let diags = check_definitions(f);
    if !diags.is_empty() {
        return Err(diags);
    }
    let use_def: Vec<_> = f.blocks.iter().map(block_use_def).collect();
    let mut live_in = vec![BTreeSet::new(); f.blocks.len()];
    let live_out = loop {
        let (next_in, next_out) = liveness_round(f, &use_def, &live_in);
        if next_in == live_in {
            break next_out;
        }
        live_in = next_in;
    };

    let mut syncs: BTreeMap<BlockId, SyncFacts> = f.sync_blocks().into_iter().map(|b| (b, SyncFacts::default())).collect();
    for site in collect_spawn_sites(f) {
        for sync in syncs_reached(f, site.block) {
            let facts = syncs.get_mut(&sync).unwrap();
            facts.spawn_sites.push((site.block, site.index));
            if let Some(d) = &site.dest {
                if !facts.pending_results.contains(d) {
                    facts.pending_results.push(d.clone());
                }
            }
        }
    }
    for (&b, facts) in syncs.iter_mut() {
        let Terminator::Sync(next) = f.blocks[b].terminator else { unreachable!() };
        facts.carried =
            live_in[next].iter().filter(|v| !facts.pending_results.contains(v)).cloned().collect();
    }
    Ok(LivenessFacts { live_in, live_out, syncs })
}

impl LivenessFacts {
    /// True when one more round of the dataflow equations changes nothing.
    pub fn is_fixpoint(&self, f: &ImplicitFunction) -> bool {
        let use_def: Vec<_> = f.blocks.iter().map(block_use_def).collect();
        let (next_in, next_out) = liveness_round(f, &use_def, &self.live_in);
        next_in == self.live_in && next_out == self.live_out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::build_cfg;

    fn cfg_of(src: &str, name: &str) -> ImplicitFunction {
        let p = compile_source(src, None).unwrap();
        build_cfg(p.function(name).unwrap())
    }

    fn set(vs: &[&str]) -> BTreeSet<String> {
        vs.iter().map(|s| s.to_string()).collect()
    }

    const FIB: &str = "task i64 fib(i64 n) {
        if (n < 2) { return n; }
        let x = spawn fib(n - 1);
        let y = spawn fib(n - 2);
        sync;
        return x + y;
    }";

    #[test]
    fn fibonacci_sync_facts() {
        let f = cfg_of(FIB, "fib");
        let facts = compute_liveness(&f).unwrap();
        let sync = &facts.syncs[&2];
        assert_eq!(sync.carried, set(&[]));
        assert_eq!(sync.pending_results, vec!["x", "y"]);
        assert!(facts.is_fixpoint(&f));
    }

    #[test]
    fn carried_variable_after_sync() {
        let src = FIB.replace("return x + y;", "return x + n;");
        let f = cfg_of(&src, "fib");
        let facts = compute_liveness(&f).unwrap();
        assert_eq!(facts.syncs[&2].carried, set(&["n"]));
        assert_eq!(facts.syncs[&2].pending_results, vec!["x", "y"]);
    }

    #[test]
    fn dead_variable_is_not_carried() {
        let src = "task i64 f(i64 n) { let dead = n * 2; let x = spawn f(n - 1); sync; return x; }";
        let f = cfg_of(src, "f");
        let facts = compute_liveness(&f).unwrap();
        assert_eq!(facts.syncs[&0].carried, set(&[]));
    }

    #[test]
    fn loop_liveness_reaches_fixpoint() {
        let src = "task void w(i64 a) { mem[a] = 1; }
                   task i64 f(i64 k) { let i = 0; let acc = 0; while (i < k) { spawn w(i); acc = acc + i; i = i + 1; } sync; return acc + k; }";
        let f = cfg_of(src, "f");
        let facts = compute_liveness(&f).unwrap();
        let (&sync, sf) = facts.syncs.iter().next().unwrap();
        assert_eq!(sf.carried, set(&["acc", "k"]));
        assert!(sf.pending_results.is_empty());
        assert_eq!(sf.spawn_sites.len(), 1);
        assert!(f.blocks[sync].loop_depth == 0);
        assert!(facts.is_fixpoint(&f));
        // The loop header keeps i, k and acc alive around the back edge.
        assert_eq!(facts.live_in[1], set(&["acc", "i", "k"]));
    }

    #[test]
    fn possibly_undefined_use_is_reported() {
        use crate::frontend::{BinOp, Expr};
        // Hand-built: b0: if (a) b1 else b2; b1: let t = 1; goto b2; b2: return t
        let mut f = cfg_of("i64 f(i64 a) { return a; }", "f");
        f.blocks = vec![
            BasicBlock {
                id: 0,
                stmts: vec![],
                terminator: Terminator::If { cond: Expr::var("a"), then_block: 1, else_block: 2, merge: Some(2) },
                loop_depth: 0,
            },
            BasicBlock {
                id: 1,
                stmts: vec![IrStmt {
                    kind: IrStmtKind::Let { name: "t".into(), value: Expr::Int(1) },
                    dae: false,
                    span: Default::default(),
                }],
                terminator: Terminator::Goto(2),
                loop_depth: 0,
            },
            BasicBlock {
                id: 2,
                stmts: vec![],
                terminator: Terminator::Return(Some(Expr::binary(BinOp::Add, Expr::var("t"), Expr::var("a")))),
                loop_depth: 0,
            },
        ];
        let diags = compute_liveness(&f).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::PossiblyUndefined);
        assert!(diags[0].message.contains("`t`"));
    }

    #[test]
    fn spawn_sites_in_program_order() {
        let sites = collect_spawn_sites(&cfg_of(FIB, "fib"));
        assert_eq!(sites.len(), 2);
        assert!(sites.iter().all(|s| s.callee == "fib"));
        assert_eq!(sites[0].dest.as_deref(), Some("x"));
        assert_eq!(sites[1].dest.as_deref(), Some("y"));
        assert!(collect_spawn_sites(&cfg_of("task i64 f() { return 0; }", "f")).is_empty());
    }
}
