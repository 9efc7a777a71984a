use std::collections::{BTreeSet, VecDeque};

use crate::frontend::{Diagnostic, DiagnosticKind};
use crate::implicit_ir::{BlockId, ImplicitFunction, Terminator};

/// A maximal sync-free region of a function; becomes one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub index: usize,
    pub entry: BlockId,
    /// Sorted block ids.
    pub blocks: Vec<BlockId>,
    /// Blocks of this path that end in a (non-elided) sync.
    pub boundaries: Vec<BlockId>,
}

/// Syncs of a void function that are followed only by `return;`. These do
/// not start a continuation; their children report to the function's own
/// return destination instead.
pub fn elided_syncs(f: &ImplicitFunction) -> BTreeSet<BlockId> {
    if f.returns_value {
        return BTreeSet::new();
    }
    f.blocks
        .iter()
        .filter_map(|b| match b.terminator {
            Terminator::Sync(next)
                if f.block(next).stmts.is_empty() && f.block(next).terminator == Terminator::Return(None) =>
            {
                Some(b.id)
            }
            _ => None,
        })
        .collect()
}

/// Splits `f` at its syncs. Path 0 starts at the entry; every other path
/// starts right after a sync, numbered in discovery order.
pub fn partition_paths(f: &ImplicitFunction) -> Result<Vec<Path>, Diagnostic> {
    let elided = elided_syncs(f);
    for b in f.sync_blocks() {
        if f.block(b).loop_depth > 0 {
            return Err(Diagnostic::new(
                DiagnosticKind::SyncInLoop,
                format!("`{}` has a sync inside a loop (block b{b})", f.name),
                None,
            ));
        }
    }
    let mut owner: Vec<Option<usize>> = vec![None; f.blocks.len()];
    let mut starts = vec![f.entry];
    let mut paths = Vec::new();
    let mut k = 0;
    while k < starts.len() {
        let entry = starts[k];
        let mut blocks = Vec::new();
        let mut boundaries = Vec::new();
        let mut queue = VecDeque::from([entry]);
        let mut seen = BTreeSet::from([entry]);
        while let Some(b) = queue.pop_front() {
            if let Some(other) = owner[b] {
                return Err(Diagnostic::new(
                    DiagnosticKind::PathsOverlap,
                    format!("block b{b} of `{}` is reachable from both path {other} and path {k}", f.name),
                    None,
                ));
            }
            owner[b] = Some(k);
            blocks.push(b);
            let term = &f.block(b).terminator;
            if let Terminator::Sync(next) = term {
                if !elided.contains(&b) {
                    boundaries.push(b);
                    if !starts.contains(next) {
                        starts.push(*next);
                    }
                    continue;
                }
            }
            for s in term.successors() {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        blocks.sort_unstable();
        paths.push(Path { index: k, entry, blocks, boundaries });
        k += 1;
    }
    Ok(paths)
}
