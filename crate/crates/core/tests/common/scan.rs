//! Relation sets recovered from the textual explicit IR by a naive
//! fixpoint, independent of the compiler's own analysis.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Default, Debug)]
pub struct Scanned {
    pub spawns: BTreeSet<String>,
    pub spawn_nexts: BTreeSet<String>,
    /// (callee, destination): a continuation name, or "parent".
    pub spawn_sites: Vec<(String, String)>,
}

/// Reads tasks, spawns and spawn_nexts back out of `dump_system` text.
pub fn scan(dump: &str) -> (Vec<String>, BTreeMap<String, Scanned>) {
    let mut order = Vec::new();
    let mut tasks: BTreeMap<String, Scanned> = BTreeMap::new();
    let mut current = String::new();
    let mut handles: BTreeMap<String, String> = BTreeMap::new();
    for line in dump.lines() {
        let head = line.split_whitespace().next().unwrap_or("");
        if matches!(head, "task" | "continuation" | "access") && !line.starts_with(' ') {
            current = line.split_whitespace().nth(1).unwrap().split('(').next().unwrap().to_string();
            order.push(current.clone());
            tasks.entry(current.clone()).or_default();
            handles.clear();
            continue;
        }
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("closure ") {
            let (handle, rest) = rest.split_once(": ").unwrap();
            handles.insert(handle.to_string(), rest.split_whitespace().next().unwrap().to_string());
        } else if let Some(rest) = line.strip_prefix("spawn ") {
            let callee = rest.split('(').next().unwrap().to_string();
            let dest = rest.rsplit("-> ").next().unwrap();
            let target = if dest == "parent" {
                "parent".to_string()
            } else {
                handles[dest.split('.').next().unwrap()].clone()
            };
            let t = tasks.get_mut(&current).unwrap();
            t.spawns.insert(callee.clone());
            t.spawn_sites.push((callee, target));
        } else if let Some(handle) = line.strip_prefix("T: spawn_next ") {
            let cont = handles[handle].clone();
            tasks.get_mut(&current).unwrap().spawn_nexts.insert(cont);
        }
    }
    (order, tasks)
}

/// Repeats a full pass over every edge until nothing changes.
pub fn brute_force_send_targets(tasks: &BTreeMap<String, Scanned>) -> BTreeMap<String, BTreeSet<String>> {
    let mut sends: BTreeMap<String, BTreeSet<String>> = tasks.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
    loop {
        let mut changed = false;
        for (name, t) in tasks {
            let own = sends[name].clone();
            for (callee, target) in &t.spawn_sites {
                let add: BTreeSet<String> =
                    if target == "parent" { own.clone() } else { BTreeSet::from([target.clone()]) };
                for a in add {
                    changed |= sends.get_mut(callee).unwrap().insert(a);
                }
            }
            for cont in &t.spawn_nexts {
                for a in own.clone() {
                    changed |= sends.get_mut(cont).unwrap().insert(a);
                }
            }
        }
        if !changed {
            return sends;
        }
    }
}
