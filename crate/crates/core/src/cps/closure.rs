use std::collections::BTreeSet;

use super::DeclPoint;
use crate::implicit_ir::{BlockId, ImplicitFunction, LivenessFacts, Terminator};

/// Every closure slot is one 64-bit word.
pub const SLOT_BITS: u32 = 64;
const MIN_CLOSURE_BITS: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinPolicy {
    /// The number of children is known when the closure is declared.
    Static(usize),
    /// The counter starts at zero and each executed spawn adds one.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldRole {
    ReturnDest,
    Ready,
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureField {
    pub name: String,
    pub role: FieldRole,
    pub offset_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureLayout {
    pub continuation: String,
    /// Values live across the sync that are already known when it is declared.
    pub ready_args: Vec<String>,
    /// Spawn results, filled in by the children.
    pub placeholders: Vec<String>,
    pub has_return_dest: bool,
    pub join: JoinPolicy,
    pub payload_bits: u32,
    pub padded_bits: u32,
}

/// Smallest power of two holding `payload_bits`, and at least 128.
pub fn padded_bits_for(payload_bits: u32) -> u32 {
    payload_bits.max(MIN_CLOSURE_BITS).next_power_of_two()
}

impl ClosureLayout {
    pub fn new(
        continuation: impl Into<String>,
        ready_args: Vec<String>,
        placeholders: Vec<String>,
        has_return_dest: bool,
        join: JoinPolicy,
    ) -> Self {
        let slots = usize::from(has_return_dest) + ready_args.len() + placeholders.len();
        let payload_bits = SLOT_BITS * slots as u32;
        ClosureLayout {
            continuation: continuation.into(),
            ready_args,
            placeholders,
            has_return_dest,
            join,
            payload_bits,
            padded_bits: padded_bits_for(payload_bits),
        }
    }

    /// Fields in memory order: return destination, ready arguments, placeholders.
    pub fn fields(&self) -> Vec<ClosureField> {
        let mut out = Vec::new();
        if self.has_return_dest {
            out.push(("ret".to_string(), FieldRole::ReturnDest));
        }
        out.extend(self.ready_args.iter().map(|v| (v.clone(), FieldRole::Ready)));
        out.extend(self.placeholders.iter().map(|v| (v.clone(), FieldRole::Placeholder)));
        out.into_iter()
            .enumerate()
            .map(|(i, (name, role))| ClosureField { name, role, offset_bits: SLOT_BITS * i as u32 })
            .collect()
    }

    /// Slot index of a ready argument or placeholder.
    pub fn slot_of(&self, var: &str) -> Option<usize> {
        self.fields().iter().position(|f| f.role != FieldRole::ReturnDest && f.name == var)
    }

    /// Continuation parameters: ready arguments then placeholders.
    pub fn params(&self) -> Vec<String> {
        self.ready_args.iter().chain(&self.placeholders).cloned().collect()
    }
}

/// Order in which variables are first read when executing from `start`,
/// walking the blocks depth first (syncs are crossed).
fn first_use_order(f: &ImplicitFunction, start: BlockId) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    let push = |vs: Vec<String>, order: &mut Vec<String>| {
        for v in vs {
            if !order.contains(&v) {
                order.push(v);
            }
        }
    };
    let mut seen = vec![false; f.blocks.len()];
    let mut stack = vec![start];
    while let Some(b) = stack.pop() {
        if std::mem::replace(&mut seen[b], true) {
            continue;
        }
        let block = f.block(b);
        for s in &block.stmts {
            push(s.kind.uses(), &mut order);
        }
        push(block.terminator.uses(), &mut order);
        for s in block.terminator.successors().into_iter().rev() {
            if !seen[s] {
                stack.push(s);
            }
        }
    }
    order
}

/// Layout of the closure for the continuation after `sync_block`.
pub fn synthesize_closure(
    f: &ImplicitFunction,
    facts: &LivenessFacts,
    sync_block: BlockId,
    continuation: &str,
    decl: &DeclPoint,
) -> ClosureLayout {
    let sync = &facts.syncs[&sync_block];
    let Terminator::Sync(next) = f.block(sync_block).terminator else {
        panic!("b{sync_block} does not end in a sync");
    };
    let mut remaining: BTreeSet<String> = sync.carried.clone();
    let mut ready_args = Vec::new();
    for v in first_use_order(f, next) {
        if remaining.remove(&v) {
            ready_args.push(v);
        }
    }
    ready_args.extend(remaining);
    let straight_line = sync.spawn_sites.iter().all(|(b, _)| *b == decl.block);
    let join = if straight_line { JoinPolicy::Static(sync.spawn_sites.len()) } else { JoinPolicy::Dynamic };
    ClosureLayout::new(continuation, ready_args, sync.pending_results.clone(), f.returns_value, join)
}
