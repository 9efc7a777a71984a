use std::collections::{BTreeMap, BTreeSet};

use super::*;

/// Static communication pattern of one task type.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskRelations {
    /// Task types this task spawns as children.
    pub spawns: BTreeSet<String>,
    /// Continuations this task issues with `spawn_next`.
    pub spawn_nexts: BTreeSet<String>,
    /// Continuations this task may deliver its result or completion to.
    pub send_arguments_to: BTreeSet<String>,
    pub is_root: bool,
    /// Whether a send from this task can end up at the host (root output).
    pub may_reach_host: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SystemRelations {
    pub tasks: BTreeMap<String, TaskRelations>,
}

impl SystemRelations {
    pub fn get(&self, task: &str) -> &TaskRelations {
        &self.tasks[task]
    }
}

fn spawns_of(task: &ExplicitTaskFunction) -> impl Iterator<Item = (&String, &SpawnDest)> {
    task.blocks.iter().flat_map(|b| &b.stmts).filter_map(|s| match &s.kind {
        ExStmtKind::SpawnTask { callee, dest, .. } => Some((callee, dest)),
        _ => None,
    })
}

fn spawn_next_targets(task: &ExplicitTaskFunction) -> Vec<String> {
    task.blocks
        .iter()
        .filter_map(|b| match &b.terminator {
            ExTerminator::SpawnNext { handle } => task.closure_layout(handle).map(|l| l.continuation.clone()),
            _ => None,
        })
        .collect()
}

/// Derives spawn, spawn-next and send-argument edges. A task sends to the
/// continuation its spawner addressed it at; continuations and `-> parent`
/// children inherit their spawner's destinations.
pub fn analyze_relations(system: &ExplicitSystem) -> SystemRelations {
    let mut rel: BTreeMap<String, TaskRelations> = system
        .tasks
        .iter()
        .map(|t| {
            let r = TaskRelations {
                spawns: spawns_of(t).map(|(c, _)| c.clone()).collect(),
                spawn_nexts: spawn_next_targets(t).into_iter().collect(),
                send_arguments_to: BTreeSet::new(),
                is_root: t.name == system.entry,
                may_reach_host: t.name == system.entry,
            };
            (t.name.clone(), r)
        })
        .collect();

    for t in &system.tasks {
        for (callee, dest) in spawns_of(t) {
            let handle = match dest {
                SpawnDest::Field { handle, .. } | SpawnDest::Counter { handle } => handle,
                SpawnDest::Parent => continue,
            };
            if let (Some(layout), Some(r)) = (t.closure_layout(handle), rel.get_mut(callee)) {
                r.send_arguments_to.insert(layout.continuation.clone());
            }
        }
    }

    // Propagate inherited destinations to a fixpoint.
    let mut inherit: Vec<(String, String)> = Vec::new();
    for t in &system.tasks {
        for (callee, dest) in spawns_of(t) {
            if *dest == SpawnDest::Parent {
                inherit.push((t.name.clone(), callee.clone()));
            }
        }
        for c in spawn_next_targets(t) {
            inherit.push((t.name.clone(), c));
        }
    }
    loop {
        let mut changed = false;
        for (from, to) in &inherit {
            let Some(src) = rel.get(from).map(|r| r.send_arguments_to.clone()) else { continue };
            let host = rel[from].may_reach_host;
            if let Some(dst) = rel.get_mut(to) {
                for d in src {
                    changed |= dst.send_arguments_to.insert(d);
                }
                if host && !dst.may_reach_host {
                    dst.may_reach_host = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    SystemRelations { tasks: rel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::build_program;

    fn relations(src: &str) -> SystemRelations {
        analyze_relations(&lower_program(&build_program(&compile_source(src, None).unwrap())).unwrap())
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fibonacci_relations() {
        let r = relations(
            "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }",
        );
        let fib = r.get("fib");
        assert_eq!(fib.spawns, set(&["fib"]));
        assert_eq!(fib.spawn_nexts, set(&["fib__cont0"]));
        assert_eq!(fib.send_arguments_to, set(&["fib__cont0"]));
        assert!(fib.is_root);
        let cont = r.get("fib__cont0");
        assert!(cont.spawns.is_empty());
        assert_eq!(cont.send_arguments_to, set(&["fib__cont0"]));
        assert!(cont.may_reach_host);
    }

    #[test]
    fn parent_forwarding_inherits_destinations() {
        let r = relations(
            "task i64 main(i64 n) { spawn t(n); sync; return n; }
             task void t(i64 n) { if (n > 0) { spawn t(n - 1); } }",
        );
        assert_eq!(r.get("t").send_arguments_to, set(&["main__cont0"]));
        assert_eq!(r.get("main__cont0").send_arguments_to, set(&[]));
        assert!(r.get("main__cont0").may_reach_host);
        assert!(!r.get("t").may_reach_host);
    }
}
