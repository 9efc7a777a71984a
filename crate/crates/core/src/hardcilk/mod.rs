//! HardCilk-style backend: one HLS C++ processing element per task plus a
//! JSON descriptor of the task system.

mod descriptor;
mod emit;

pub use descriptor::{descriptor_value, emit_system_json, SCHEMA_JSON, SYSTEM_VERSION};
pub use emit::{emit_pe_cpp, EmittedPe};

use std::path::{Path, PathBuf};

use crate::cps::{padded_bits_for, ClosureLayout, ExplicitSystem, ExplicitTaskFunction, SystemRelations, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructField {
    pub name: String,
    pub offset_bytes: u32,
    pub size_bytes: u32,
    pub is_padding: bool,
}

/// Memory image of a closure or argument struct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureStruct {
    pub type_name: String,
    pub fields: Vec<StructField>,
    pub payload_bits: u32,
    pub padded_bits: u32,
}

impl ClosureStruct {
    /// `vars` are source variable names; `has_ret` prepends `ret_dest`.
    fn build(type_name: String, has_ret: bool, vars: Vec<String>) -> Self {
        let names = has_ret.then(|| "ret_dest".to_string()).into_iter().chain(vars.iter().map(|v| c_ident(v)));
        let mut fields: Vec<StructField> = names
            .enumerate()
            .map(|(i, name)| StructField { name, offset_bytes: 8 * i as u32, size_bytes: 8, is_padding: false })
            .collect();
        let payload_bits = 64 * fields.len() as u32;
        let padded_bits = padded_bits_for(payload_bits);
        if payload_bits < padded_bits {
            fields.push(StructField {
                name: "_pad".to_string(),
                offset_bytes: payload_bits / 8,
                size_bytes: (padded_bits - payload_bits) / 8,
                is_padding: true,
            });
        }
        ClosureStruct { type_name, fields, payload_bits, padded_bits }
    }

    pub fn size_bytes(&self) -> u32 {
        self.padded_bits / 8
    }

    /// Field index of variable `var`, as used in return destinations.
    pub fn field_index(&self, var: &str) -> Option<usize> {
        let name = c_ident(var);
        self.fields.iter().position(|f| !f.is_padding && f.name == name)
    }
}

const CPP_KEYWORDS: &[&str] = &[
    "alignas", "alignof", "and", "asm", "auto", "bool", "break", "case", "catch", "char", "class", "const",
    "constexpr", "continue", "default", "delete", "do", "double", "else", "enum", "explicit", "export", "extern",
    "false", "float", "for", "friend", "goto", "if", "inline", "int", "long", "mutable", "namespace", "new", "not",
    "nullptr", "operator", "or", "private", "protected", "public", "register", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "template", "this", "throw", "true", "try", "typedef", "typename",
    "union", "unsigned", "using", "virtual", "void", "volatile", "while", "xor",
];

/// C++ spelling of a source identifier. Keywords and names that could
/// collide with generated ones get a `_v` suffix.
pub(crate) fn c_ident(name: &str) -> String {
    let reserved = CPP_KEYWORDS.contains(&name)
        || name.starts_with("cilk_")
        || name.starts_with("TASK_")
        || matches!(name, "ret_dest" | "done_dest" | "body" | "_pad" | "mem");
    if reserved {
        format!("{name}_v")
    } else {
        name.to_string()
    }
}

/// Closure struct of a continuation: return destination, ready arguments,
/// placeholders, then padding up to a power of two of at least 128 bits.
pub fn compute_closure_struct(layout: &ClosureLayout) -> ClosureStruct {
    ClosureStruct::build(format!("{}_closure", layout.continuation), layout.has_return_dest, layout.params())
}

/// Struct a task reads from its argument stream. Continuations use their
/// closure layout; other tasks get an argument struct built the same way.
pub fn task_struct(system: &ExplicitSystem, task: &ExplicitTaskFunction) -> ClosureStruct {
    if task.kind == TaskKind::Continuation {
        if let Some(layout) = system.closure_layouts().get(&task.name) {
            return compute_closure_struct(layout);
        }
    }
    ClosureStruct::build(format!("{}_args", task.name), task.returns_value, task.params.clone())
}

/// Writes `pe_<task>.cpp` for every task, `system.json` and `schema.json`
/// into `dir`. Returns the written paths in that order.
pub fn write_artifacts(dir: &Path, system: &ExplicitSystem, relations: &SystemRelations) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for task in &system.tasks {
        let pe = emit_pe_cpp(system, relations, &task.name);
        let path = dir.join(format!("pe_{}.cpp", task.name));
        std::fs::write(&path, pe.source_text)?;
        written.push(path);
    }
    for (name, text) in [("system.json", emit_system_json(system, relations)), ("schema.json", SCHEMA_JSON.to_string())] {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
