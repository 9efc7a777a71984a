#![allow(dead_code)]

pub mod scan;

use std::path::PathBuf;

use minicilk::graph::TreeGenConfig;
use minicilk::runtime::GlobalMemory;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn read_corpus(file: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(file)).unwrap()
}

/// Every `.mc` file in the corpus, sorted.
pub fn corpus_files() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".mc"))
        .collect();
    names.sort();
    names
}

/// A corpus program with one concrete input.
pub struct Case {
    pub file: &'static str,
    pub args: Vec<i64>,
    pub memory: Vec<i64>,
}

fn counting(n: usize) -> Vec<i64> {
    (0..n as i64).map(|i| i * 7 - 20).collect()
}

pub fn cases() -> Vec<Case> {
    let (tree, image) = TreeGenConfig { branch: 3, depth: 4 }.generate(None).unwrap();
    vec![
        Case { file: "binomial.mc", args: vec![10, 4], memory: vec![] },
        Case { file: "carried.mc", args: vec![7, 2], memory: vec![] },
        Case { file: "cond_spawn.mc", args: vec![9], memory: vec![] },
        Case { file: "cond_spawn.mc", args: vec![2], memory: vec![] },
        Case { file: "dac_sum.mc", args: vec![0, 37], memory: counting(40) },
        Case { file: "dae_sum.mc", args: vec![3, 29], memory: counting(32) },
        Case { file: "fib.mc", args: vec![12], memory: vec![] },
        Case { file: "minimal.mc", args: vec![-4], memory: vec![] },
        Case { file: "power.mc", args: vec![3, 13], memory: vec![] },
        Case { file: "store_dae.mc", args: vec![4, 12], memory: vec![0; 16] },
        Case { file: "two_sync.mc", args: vec![5], memory: vec![] },
        Case { file: "visit.mc", args: tree.visit_args(), memory: image.to_vec() },
        Case { file: "void_spawn_loop.mc", args: vec![2, 9], memory: vec![0; 12] },
    ]
}

pub fn memory(words: &[i64]) -> GlobalMemory {
    GlobalMemory::from_words(words)
}

pub fn fib(n: u64) -> i64 {
    let (mut a, mut b) = (0i64, 1i64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}
