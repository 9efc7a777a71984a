//! Execution of lowered programs.
//!
//! * [`run_sequential_oracle`] walks the implicit IR depth first, treating
//!   `spawn` as a call and `sync` as a no-op. It is the reference result.
//! * [`run_explicit`] executes the explicit IR on a pool of work-stealing
//!   workers with join-counted closures.
//! * [`simulate_cost`] replays the explicit IR in virtual time on per-task
//!   processing-element pools to estimate makespan.

mod closures;
mod engine;
mod memory;
mod oracle;
mod parallel;
mod simulate;

pub use memory::GlobalMemory;
pub use oracle::{run_sequential_oracle, OracleOutcome};
pub use parallel::{run_explicit, RunOutcome};
pub use simulate::{simulate_cost, CostConfig, SimOutcome};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::frontend::BinOp;

pub const STATS_VERSION: &str = "minicilk-stats/1";
pub const DEFAULT_STEP_LIMIT: u64 = 2_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("memory access at word {addr} is out of bounds (size {size})")]
    OutOfBounds { addr: i64, size: usize },
    #[error("step limit of {0} statements exceeded")]
    StepLimit(u64),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` expects {expected} arguments, got {got}")]
    ArgumentCount { task: String, expected: usize, got: usize },
    #[error("invalid cost configuration: {0}")]
    BadConfig(String),
    #[error("placeholder `{field}` of closure {closure} written twice")]
    DoubleWrite { closure: u64, field: String },
    #[error("join counter of closure {closure} went below zero")]
    CounterUnderflow { closure: u64 },
    #[error("closure {closure} retired after {received} arguments, expected {expected}")]
    Conservation { closure: u64, expected: u64, received: u64 },
    #[error("deadlock: no runnable task and the root result was never delivered\n{dump}")]
    Deadlock { dump: String },
}

impl RuntimeError {
    /// Errors that indicate a bug in lowering or scheduling rather than in
    /// the program being run.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            RuntimeError::DoubleWrite { .. }
                | RuntimeError::CounterUnderflow { .. }
                | RuntimeError::Conservation { .. }
                | RuntimeError::Deadlock { .. }
        )
    }
}

/// Counters reported by every execution mode. Fields that do not apply to a
/// mode are left out of the JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Stats {
    pub version: &'static str,
    pub tasks_executed: BTreeMap<String, u64>,
    pub steals: u64,
    pub closures_created: u64,
    pub send_arguments: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub makespan: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utilization: Option<BTreeMap<String, f64>>,
}

impl Stats {
    pub fn new() -> Self {
        Stats { version: STATS_VERSION, ..Default::default() }
    }

    pub fn total_tasks(&self) -> u64 {
        self.tasks_executed.values().sum()
    }
}

/// Arithmetic wraps on overflow; comparisons yield 0 or 1. `&&` and `||`
/// are short-circuiting and handled by the evaluators.
pub(crate) fn apply_binop(op: BinOp, a: i64, b: i64) -> Result<i64, RuntimeError> {
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return Err(RuntimeError::DivisionByZero);
            }
            a.wrapping_div(b)
        }
        BinOp::Rem => {
            if b == 0 {
                return Err(RuntimeError::DivisionByZero);
            }
            a.wrapping_rem(b)
        }
        BinOp::Eq => i64::from(a == b),
        BinOp::Ne => i64::from(a != b),
        BinOp::Lt => i64::from(a < b),
        BinOp::Le => i64::from(a <= b),
        BinOp::Gt => i64::from(a > b),
        BinOp::Ge => i64::from(a >= b),
        BinOp::And => i64::from(a != 0 && b != 0),
        BinOp::Or => i64::from(a != 0 || b != 0),
    })
}
