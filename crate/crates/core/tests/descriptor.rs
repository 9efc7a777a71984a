//! The emitted descriptor against the bundled schema and against relation
//! sets recovered from the textual explicit IR by a naive fixpoint.

mod common;

use common::scan::{brute_force_send_targets, scan};

use minicilk::cps::dump_system;
use minicilk::hardcilk::{descriptor_value, emit_system_json, SCHEMA_JSON};
use minicilk::pipeline::{compile, CompileOptions};
use serde_json::{json, Value};

fn validate(instance: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA_JSON).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(instance).map(|e| e.to_string()).collect()
}

#[test]
fn descriptors_validate_and_match_the_scan() {
    for f in common::corpus_files() {
        let c = compile(&common::read_corpus(&f), &CompileOptions::default()).unwrap();
        let text = emit_system_json(&c.explicit, &c.relations);
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(validate(&value), Vec::<String>::new(), "{f}");

        let (order, scanned) = scan(&dump_system(&c.explicit));
        let sends = brute_force_send_targets(&scanned);
        let names: Vec<&str> = value["tasks"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
        assert_eq!(names, order, "{f}");
        for t in value["tasks"].as_array().unwrap() {
            let name = t["name"].as_str().unwrap();
            let s = &scanned[name];
            assert_eq!(t["spawns"], json!(s.spawns), "{f}: {name}");
            assert_eq!(t["spawn_nexts"], json!(s.spawn_nexts), "{f}: {name}");
            assert_eq!(t["send_arguments_to"], json!(sends[name]), "{f}: {name}");
            assert_eq!(t["is_root"], json!(name == c.explicit.entry), "{f}: {name}");
        }
        assert_eq!(text, emit_system_json(&c.explicit, &c.relations), "{f}: output is not stable");
        assert!(text.ends_with("}\n"));
    }
}

#[test]
fn schema_rejects_malformed_descriptors() {
    let c = compile(&common::read_corpus("fib.mc"), &CompileOptions::default()).unwrap();
    let good = descriptor_value(&c.explicit, &c.relations);
    let mut extra = good.clone();
    extra["tasks"][0]["surprise"] = json!(1);
    assert!(!validate(&extra).is_empty());
    let mut small = good.clone();
    small["tasks"][1]["closure_size_bits"] = json!(64);
    assert!(!validate(&small).is_empty());
    let mut versioned = good;
    versioned["version"] = json!("minicilk-system/0");
    assert!(!validate(&versioned).is_empty());
}
