use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use crossbeam_deque::{Steal, Stealer, Worker};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::closures::{ClosureState, Fired};
use super::engine::{execute, ClosureId, CompiledSystem, Dest, Host, TaskInstance, ROOT_CLOSURE};
use super::{GlobalMemory, RuntimeError, Stats};
use crate::cps::ExplicitSystem;

const SHARDS: usize = 32;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: Option<i64>,
    pub stats: Stats,
}

/// Closures live in one table keyed by id, so any worker can deliver to
/// any closure.
struct ClosureTable {
    shards: Vec<Mutex<HashMap<ClosureId, ClosureState>>>,
    next_id: AtomicU64,
}

impl ClosureTable {
    fn shard(&self, id: ClosureId) -> &Mutex<HashMap<ClosureId, ClosureState>> {
        &self.shards[id as usize % SHARDS]
    }
}

struct Shared<'a> {
    sys: &'a CompiledSystem,
    mem: &'a GlobalMemory,
    closures: ClosureTable,
    stealers: Vec<Stealer<TaskInstance>>,
    /// Tasks queued or running. Zero means nothing can happen any more.
    live: AtomicUsize,
    failed: AtomicBool,
    error: Mutex<Option<RuntimeError>>,
    result: Mutex<Option<Option<i64>>>,
    steps: AtomicU64,
    step_limit: u64,
    executed: Vec<AtomicU64>,
    steals: AtomicU64,
    closures_created: AtomicU64,
    sends: AtomicU64,
}

impl Shared<'_> {
    fn fail(&self, e: RuntimeError) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.failed.store(true, Ordering::SeqCst);
    }

    fn dump(&self) -> String {
        let mut lines = Vec::new();
        for shard in &self.closures.shards {
            let shard = shard.lock().unwrap();
            let mut ids: Vec<_> = shard.keys().copied().collect();
            ids.sort_unstable();
            lines.extend(ids.into_iter().map(|id| shard[&id].describe(self.sys, id)));
        }
        if lines.is_empty() {
            "no pending closures".to_string()
        } else {
            lines.join("\n")
        }
    }
}

struct WorkerHost<'s, 'a> {
    shared: &'s Shared<'a>,
    local: &'s Worker<TaskInstance>,
}

impl WorkerHost<'_, '_> {
    fn push(&self, task: TaskInstance) {
        self.shared.live.fetch_add(1, Ordering::SeqCst);
        self.local.push(task);
    }

    fn fire(&self, state: ClosureState, id: ClosureId) -> Result<(), RuntimeError> {
        match state.fire(self.shared.sys, id)? {
            Fired::Task(t) => self.push(t),
            Fired::Root(v) => *self.shared.result.lock().unwrap() = Some(v),
        }
        Ok(())
    }

    fn with_closure(
        &self,
        id: ClosureId,
        f: impl FnOnce(&mut ClosureState) -> Result<bool, RuntimeError>,
    ) -> Result<(), RuntimeError> {
        let ready = {
            let mut shard = self.shared.closures.shard(id).lock().unwrap();
            let state = shard.get_mut(&id).expect("closure is live until it fires");
            if f(state)? {
                shard.remove(&id)
            } else {
                None
            }
        };
        match ready {
            Some(state) => self.fire(state, id),
            None => Ok(()),
        }
    }
}

impl Host for WorkerHost<'_, '_> {
    fn memory(&self) -> &GlobalMemory {
        self.shared.mem
    }

    fn declare(&mut self, layout: u32, ret: Dest) -> Result<ClosureId, RuntimeError> {
        let id = self.shared.closures.next_id.fetch_add(1, Ordering::Relaxed);
        let state = ClosureState::new(self.shared.sys, layout, ret);
        self.shared.closures.shard(id).lock().unwrap().insert(id, state);
        self.shared.closures_created.fetch_add(1, Ordering::Relaxed);
        Ok(id)
    }

    fn add_child(&mut self, closure: ClosureId) -> Result<(), RuntimeError> {
        self.with_closure(closure, |c| {
            c.add_child();
            Ok(false)
        })
    }

    fn spawn(&mut self, task: TaskInstance) -> Result<(), RuntimeError> {
        self.push(task);
        Ok(())
    }

    fn spawn_next(&mut self, closure: ClosureId, fills: Vec<(u32, i64)>) -> Result<(), RuntimeError> {
        let sys = self.shared.sys;
        self.with_closure(closure, |c| c.issue_next(sys, closure, &fills))
    }

    fn send(&mut self, dest: Dest, value: Option<i64>) -> Result<(), RuntimeError> {
        self.shared.sends.fetch_add(1, Ordering::Relaxed);
        let sys = self.shared.sys;
        self.with_closure(dest.closure, |c| c.receive(sys, dest.closure, dest.slot, value))
    }
}

fn find_task(shared: &Shared, local: &Worker<TaskInstance>, me: usize, rng: &mut ChaCha8Rng) -> Option<TaskInstance> {
    if let Some(t) = local.pop() {
        return Some(t);
    }
    let n = shared.stealers.len();
    if n < 2 {
        return None;
    }
    for _ in 0..2 * n {
        let mut victim = rng.gen_range(0..n - 1);
        if victim >= me {
            victim += 1;
        }
        loop {
            match shared.stealers[victim].steal() {
                Steal::Success(t) => {
                    shared.steals.fetch_add(1, Ordering::Relaxed);
                    return Some(t);
                }
                Steal::Retry => continue,
                Steal::Empty => break,
            }
        }
    }
    None
}

fn worker_loop(shared: &Shared, local: Worker<TaskInstance>, me: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(me as u64));
    let mut host = WorkerHost { shared, local: &local };
    let mut idle_rounds = 0u32;
    loop {
        if shared.failed.load(Ordering::SeqCst) {
            return;
        }
        match find_task(shared, &local, me, &mut rng) {
            Some(task) => {
                idle_rounds = 0;
                shared.executed[task.task as usize].fetch_add(1, Ordering::Relaxed);
                let budget = shared.step_limit.saturating_sub(shared.steps.load(Ordering::Relaxed));
                match execute(shared.sys, &task, &mut host, budget) {
                    Ok(cost) => {
                        let total = shared.steps.fetch_add(cost.stmts, Ordering::Relaxed) + cost.stmts;
                        if total > shared.step_limit {
                            shared.fail(RuntimeError::StepLimit(shared.step_limit));
                        }
                    }
                    Err(RuntimeError::StepLimit(_)) => shared.fail(RuntimeError::StepLimit(shared.step_limit)),
                    Err(e) => shared.fail(e),
                }
                shared.live.fetch_sub(1, Ordering::SeqCst);
            }
            None => {
                if shared.live.load(Ordering::SeqCst) == 0 {
                    return;
                }
                idle_rounds += 1;
                if idle_rounds < 64 {
                    std::hint::spin_loop();
                } else {
                    std::thread::yield_now();
                }
            }
        }
    }
}

/// Runs the entry task of `system` on `workers` work-stealing workers.
///
/// Each worker pops its own deque LIFO and steals FIFO from a victim picked
/// uniformly at random from a generator seeded with `seed`. With one worker
/// the run is fully deterministic. `memory` is updated in place.
pub fn run_explicit(
    system: &ExplicitSystem,
    args: &[i64],
    memory: &GlobalMemory,
    workers: usize,
    seed: u64,
    step_limit: u64,
) -> Result<RunOutcome, RuntimeError> {
    let sys = CompiledSystem::compile(system)?;
    let entry = &sys.tasks[sys.entry as usize];
    if entry.n_params != args.len() {
        return Err(RuntimeError::ArgumentCount { task: entry.name.clone(), expected: entry.n_params, got: args.len() });
    }
    let workers = workers.max(1);
    let locals: Vec<Worker<TaskInstance>> = (0..workers).map(|_| Worker::new_lifo()).collect();
    let closures = ClosureTable { shards: (0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect(), next_id: AtomicU64::new(1) };
    closures.shard(ROOT_CLOSURE).lock().unwrap().insert(ROOT_CLOSURE, ClosureState::root());
    let root_slot = sys.entry_returns_value.then_some(0);
    let shared = Shared {
        sys: &sys,
        mem: memory,
        closures,
        stealers: locals.iter().map(Worker::stealer).collect(),
        live: AtomicUsize::new(1),
        failed: AtomicBool::new(false),
        error: Mutex::new(None),
        result: Mutex::new(None),
        steps: AtomicU64::new(0),
        step_limit,
        executed: sys.tasks.iter().map(|_| AtomicU64::new(0)).collect(),
        steals: AtomicU64::new(0),
        closures_created: AtomicU64::new(0),
        sends: AtomicU64::new(0),
    };
    locals[0].push(TaskInstance { task: sys.entry, args: args.to_vec(), ret: Dest { closure: ROOT_CLOSURE, slot: root_slot } });

    if workers == 1 {
        let local = locals.into_iter().next().unwrap();
        worker_loop(&shared, local, 0, seed);
    } else {
        std::thread::scope(|scope| {
            for (me, local) in locals.into_iter().enumerate() {
                let shared = &shared;
                scope.spawn(move || worker_loop(shared, local, me, seed));
            }
        });
    }

    if let Some(e) = shared.error.lock().unwrap().take() {
        return Err(e);
    }
    let Some(result) = shared.result.lock().unwrap().take() else {
        return Err(RuntimeError::Deadlock { dump: shared.dump() });
    };
    let mut stats = Stats::new();
    for (t, n) in sys.tasks.iter().zip(&shared.executed) {
        stats.tasks_executed.insert(t.name.clone(), n.load(Ordering::Relaxed));
    }
    stats.steals = shared.steals.load(Ordering::Relaxed);
    stats.closures_created = shared.closures_created.load(Ordering::Relaxed);
    stats.send_arguments = shared.sends.load(Ordering::Relaxed);
    Ok(RunOutcome { result, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::build_program;

    fn lower(src: &str) -> ExplicitSystem {
        crate::cps::lower_program(&build_program(&compile_source(src, None).unwrap())).unwrap()
    }

    const FIB: &str = "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }";

    #[test]
    fn fibonacci_on_several_workers() {
        let sys = lower(FIB);
        let mem = GlobalMemory::new(0);
        for workers in [1, 2, 8] {
            for seed in 0..5 {
                let out = run_explicit(&sys, &[15], &mem, workers, seed, u64::MAX).unwrap();
                assert_eq!(out.result, Some(610));
            }
        }
    }

    #[test]
    fn base_case_creates_no_closure() {
        let out = run_explicit(&lower(FIB), &[0], &GlobalMemory::new(0), 1, 0, u64::MAX).unwrap();
        assert_eq!(out.result, Some(0));
        assert_eq!(out.stats.closures_created, 0);
    }

    #[test]
    fn conditional_spawn_keeps_local_value() {
        let sys = lower("task i64 f(i64 n) { let a = 100; if (n > 3) { a = spawn f(n - 1); } sync; return a + n; }");
        let out = run_explicit(&sys, &[5], &GlobalMemory::new(0), 2, 1, u64::MAX).unwrap();
        // f(3) = 103, f(4) = 107, f(5) = 112
        assert_eq!(out.result, Some(112));
    }

    #[test]
    fn void_forwarding_and_loops() {
        let sys = lower(
            "task void mark(i64 a, i64 n) { if (n > 0) { mem[a + n] = n; spawn mark(a, n - 1); spawn mark(a, n - 1); } }
             task i64 main(i64 n) { let i = 0; while (i < 3) { spawn mark(i * 8, n); i = i + 1; } sync; return mem[3] + mem[9] + mem[17]; }",
        );
        let mem = GlobalMemory::new(32);
        let out = run_explicit(&sys, &[4], &mem, 4, 3, u64::MAX).unwrap();
        assert_eq!(out.result, Some(5));
        assert_eq!(out.stats.tasks_executed["mark"], 3 * 31);
    }

    #[test]
    fn runtime_errors_propagate() {
        let sys = lower("task i64 f(i64 n) { let x = spawn g(n); sync; return x; } task i64 g(i64 n) { return 10 / n; }");
        for workers in [1, 4] {
            let e = run_explicit(&sys, &[0], &GlobalMemory::new(0), workers, 0, u64::MAX).unwrap_err();
            assert_eq!(e, RuntimeError::DivisionByZero);
        }
    }

    #[test]
    fn step_limit_is_enforced() {
        let sys = lower("task i64 f() { while (1) { } return 0; }");
        let e = run_explicit(&sys, &[], &GlobalMemory::new(0), 1, 0, 10_000).unwrap_err();
        assert_eq!(e, RuntimeError::StepLimit(10_000));
    }
}
