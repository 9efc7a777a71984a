//! Byte-exact comparisons against checked-in outputs. Run with
//! `UPDATE_GOLDEN=1` to rewrite them after an intended change.

mod common;

use std::path::PathBuf;

use minicilk::cps::dump_system;
use minicilk::hardcilk::{emit_pe_cpp, emit_system_json};
use minicilk::implicit_ir::dump_program;
use minicilk::pipeline::{compile, CompileOptions};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from the checked-in copy");
}

#[test]
fn fibonacci_implicit_ir() {
    let c = compile(&common::read_corpus("fib.mc"), &CompileOptions::default()).unwrap();
    check("fib.implicit.txt", &dump_program(&c.implicit));
}

#[test]
fn fibonacci_explicit_ir() {
    let c = compile(&common::read_corpus("fib.mc"), &CompileOptions::default()).unwrap();
    check("fib.explicit.txt", &dump_system(&c.explicit));
}

#[test]
fn fibonacci_processing_elements() {
    let c = compile(&common::read_corpus("fib.mc"), &CompileOptions::default()).unwrap();
    for t in ["fib", "fib__cont0"] {
        check(&format!("pe_{t}.cpp"), &emit_pe_cpp(&c.explicit, &c.relations, t).source_text);
    }
    check("fib.system.json", &emit_system_json(&c.explicit, &c.relations));
}

#[test]
fn traversal_explicit_ir_with_access_split() {
    let c = compile(&common::read_corpus("visit.mc"), &CompileOptions::default()).unwrap();
    check("visit.explicit.txt", &dump_system(&c.explicit));
    check("visit.system.json", &emit_system_json(&c.explicit, &c.relations));
}
