//! The DAE A/B sweep: the graph traversal on a generated tree, simulated
//! with and without the access split over a range of memory latencies.

use serde::Serialize;

use crate::graph::{GraphError, TreeGenConfig};
use crate::pipeline::{compile, CompileOptions, VISIT_SOURCE};
use crate::runtime::{simulate_cost, CostConfig, RuntimeError, DEFAULT_STEP_LIMIT};

pub const DEFAULT_LATENCIES: [u64; 4] = [0, 10, 100, 500];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub tree: TreeGenConfig,
    pub latencies: Vec<u64>,
    pub stmt_cost: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { tree: TreeGenConfig { branch: 4, depth: 7 }, latencies: DEFAULT_LATENCIES.to_vec(), stmt_cost: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub branch: u64,
    pub depth: u32,
    pub nodes: u64,
    pub mem_latency: u64,
    pub dae: &'static str,
    pub makespan: u64,
    pub tasks: u64,
    pub visited: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("the traversal program failed to compile: {0}")]
    Compile(String),
}

/// One row per (latency, DAE setting), latencies in the given order and
/// the non-DAE run first. Every run starts from a fresh tree image.
pub fn run_visit_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    let (layout, image) = cfg.tree.generate(None)?;
    let mut rows = Vec::new();
    for &mem_latency in &cfg.latencies {
        for dae in [false, true] {
            let compiled = compile(VISIT_SOURCE, &CompileOptions { entry: None, dae })
                .map_err(|d| BenchError::Compile(d.to_string()))?;
            let memory = image.clone();
            let cost = CostConfig { stmt_cost: cfg.stmt_cost, mem_latency, ..Default::default() };
            let out = simulate_cost(&compiled.explicit, &layout.visit_args(), &memory, &cost, DEFAULT_STEP_LIMIT)?;
            let visited = memory.to_vec()[layout.visited_base as usize..].iter().filter(|&&v| v != 0).count() as u64;
            rows.push(BenchRow {
                branch: cfg.tree.branch,
                depth: cfg.tree.depth,
                nodes: layout.nodes,
                mem_latency,
                dae: if dae { "on" } else { "off" },
                makespan: out.makespan,
                tasks: out.stats.total_tasks(),
                visited,
            });
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}
