use serde_json::{json, Value};

use super::task_struct;
use crate::cps::{ExplicitSystem, SystemRelations, TaskKind};

pub const SYSTEM_VERSION: &str = "minicilk-system/1";

/// JSON schema the descriptor conforms to.
pub const SCHEMA_JSON: &str = include_str!("schema.json");

fn kind_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Function => "function",
        TaskKind::Continuation => "continuation",
        TaskKind::Access => "access",
    }
}

/// Descriptor of the task system as a JSON value.
pub fn descriptor_value(system: &ExplicitSystem, relations: &SystemRelations) -> Value {
    let tasks: Vec<Value> = system
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let r = relations.get(&t.name);
            json!({
                "name": t.name,
                "index": i,
                "kind": kind_name(t.kind),
                "is_root": r.is_root,
                "closure_size_bits": task_struct(system, t).padded_bits,
                "spawns": r.spawns,
                "spawn_nexts": r.spawn_nexts,
                "send_arguments_to": r.send_arguments_to,
            })
        })
        .collect();
    json!({ "version": SYSTEM_VERSION, "entry": system.entry, "tasks": tasks })
}

/// Canonical text of the descriptor: sorted keys, two-space indent,
/// trailing newline.
pub fn emit_system_json(system: &ExplicitSystem, relations: &SystemRelations) -> String {
    let mut text = serde_json::to_string_pretty(&descriptor_value(system, relations)).expect("descriptor serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{compile, CompileOptions};

    #[test]
    fn fibonacci_descriptor() {
        let src = "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }";
        let c = compile(src, &CompileOptions::default()).unwrap();
        let v = descriptor_value(&c.explicit, &c.relations);
        assert_eq!(v["tasks"][0]["spawns"], json!(["fib"]));
        assert_eq!(v["tasks"][0]["spawn_nexts"], json!(["fib__cont0"]));
        assert_eq!(v["tasks"][0]["send_arguments_to"], json!(["fib__cont0"]));
        assert_eq!(v["tasks"][1]["closure_size_bits"], json!(256));
        assert_eq!(v["tasks"][1]["send_arguments_to"], json!(["fib__cont0"]));
        assert_eq!(v["tasks"][0]["is_root"], json!(true));
        let text = emit_system_json(&c.explicit, &c.relations);
        assert!(text.ends_with("}\n"));
        assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), v);
    }

    #[test]
    fn schema_is_valid_json() {
        let v: Value = serde_json::from_str(SCHEMA_JSON).unwrap();
        assert_eq!(v["properties"]["version"]["const"], json!(SYSTEM_VERSION));
    }
}
