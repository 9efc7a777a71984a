mod common;

use std::collections::BTreeSet;
use std::process::Command;

use common::{cases, corpus_files, memory, read_corpus};
use minicilk::hardcilk::{compute_closure_struct, emit_pe_cpp, task_struct, write_artifacts};
use minicilk::pipeline::{compile, CompileOptions};
use minicilk::runtime::{run_explicit, run_sequential_oracle, simulate_cost, CostConfig, DEFAULT_STEP_LIMIT};

#[test]
fn corpus_is_large_enough_and_fully_covered() {
    let files = corpus_files();
    assert!(files.len() >= 10, "{files:?}");
    let covered: BTreeSet<&str> = cases().iter().map(|c| c.file).collect();
    for f in &files {
        assert!(covered.contains(f.as_str()), "{f} has no test input");
    }
}

#[test]
fn every_corpus_program_compiles_with_and_without_dae() {
    for f in corpus_files() {
        let src = read_corpus(&f);
        for dae in [true, false] {
            compile(&src, &CompileOptions { entry: None, dae }).unwrap_or_else(|d| panic!("{f}: {d}"));
        }
    }
}

#[test]
fn all_execution_modes_agree() {
    for case in cases() {
        let c = compile(&read_corpus(case.file), &CompileOptions::default()).unwrap();
        let oracle_mem = memory(&case.memory);
        let expected = run_sequential_oracle(&c.implicit, &case.args, &oracle_mem, DEFAULT_STEP_LIMIT).unwrap();
        let transformed = memory(&case.memory);
        let after_dae = run_sequential_oracle(&c.post_dae, &case.args, &transformed, DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(after_dae.result, expected.result, "{}", case.file);
        assert_eq!(transformed, oracle_mem, "{}", case.file);
        for workers in [1, 2, 4] {
            for seed in 0..4 {
                let mem = memory(&case.memory);
                let out = run_explicit(&c.explicit, &case.args, &mem, workers, seed, DEFAULT_STEP_LIMIT)
                    .unwrap_or_else(|e| panic!("{} w={workers} s={seed}: {e}", case.file));
                assert_eq!(out.result, expected.result, "{} w={workers} s={seed}", case.file);
                assert_eq!(mem, oracle_mem, "{} w={workers} s={seed}", case.file);
            }
        }
        let mem = memory(&case.memory);
        let sim = simulate_cost(&c.explicit, &case.args, &mem, &CostConfig::default(), DEFAULT_STEP_LIMIT).unwrap();
        assert_eq!(sim.result, expected.result, "{}", case.file);
        assert_eq!(mem, oracle_mem, "{}", case.file);
        assert!(sim.makespan > 0);
    }
}

#[test]
fn emitted_structs_are_padded_powers_of_two() {
    for f in corpus_files() {
        let c = compile(&read_corpus(&f), &CompileOptions::default()).unwrap();
        for layout in c.explicit.closure_layouts().values() {
            let s = compute_closure_struct(layout);
            assert!(s.padded_bits.is_power_of_two() && s.padded_bits >= 128, "{f}: {}", s.type_name);
            assert!(s.payload_bits <= s.padded_bits);
            let covered: u32 = s.fields.iter().map(|x| x.size_bytes).sum();
            assert_eq!(covered * 8, s.padded_bits, "{f}: {}", s.type_name);
        }
        for t in &c.explicit.tasks {
            let s = task_struct(&c.explicit, t);
            assert!(s.padded_bits.is_power_of_two() && s.padded_bits >= 128, "{f}: {}", s.type_name);
            let pe = emit_pe_cpp(&c.explicit, &c.relations, &t.name);
            let asserted = format!("static_assert(sizeof({}) == {}", s.type_name, s.size_bytes());
            assert!(pe.source_text.contains(&asserted), "{f}: {asserted}");
        }
    }
}

#[test]
fn emitted_sources_are_well_formed() {
    for f in corpus_files() {
        let c = compile(&read_corpus(&f), &CompileOptions::default()).unwrap();
        for t in &c.explicit.tasks {
            let text = emit_pe_cpp(&c.explicit, &c.relations, &t.name).source_text;
            let opens = text.matches('{').count();
            assert_eq!(opens, text.matches('}').count(), "{f}: {}", t.name);
            assert_eq!(text.matches('(').count(), text.matches(')').count(), "{f}: {}", t.name);
            assert!(text.contains(&format!("void pe_{}(", t.name)));
            assert!(!text.contains("TODO") && !text.contains("{{") && !text.contains("\u{2014}"));
            assert!(text.lines().all(|l| l == l.trim_end()), "{f}: trailing whitespace in {}", t.name);
        }
    }
}

/// Type-checks the generated C++ against a minimal `hls::stream` when a host
/// compiler is available.
#[test]
fn emitted_sources_pass_a_cxx_syntax_check() {
    let Some(cxx) = ["g++", "clang++"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("hls_stream.h"),
        "#pragma once\n#include <deque>\nnamespace hls {\ntemplate <typename T> class stream {\n    std::deque<T> q;\n\npublic:\n    T read() { T v = q.front(); q.pop_front(); return v; }\n    void write(const T &v) { q.push_back(v); }\n};\n}\n",
    )
    .unwrap();
    for f in corpus_files() {
        let c = compile(&read_corpus(&f), &CompileOptions::default()).unwrap();
        let out = dir.path().join(f.trim_end_matches(".mc"));
        for path in write_artifacts(&out, &c.explicit, &c.relations).unwrap() {
            if path.extension().is_some_and(|e| e == "cpp") {
                let res = Command::new(cxx)
                    .args(["-std=c++17", "-fsyntax-only", "-Wall", "-Werror", "-Wno-unknown-pragmas", "-Wno-unused-variable"])
                    .arg("-I")
                    .arg(dir.path())
                    .arg(&path)
                    .output()
                    .unwrap();
                assert!(res.status.success(), "{}:\n{}", path.display(), String::from_utf8_lossy(&res.stderr));
            }
        }
    }
}
