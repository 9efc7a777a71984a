use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use super::closures::{ClosureState, Fired};
use super::engine::{execute, ClosureId, CompiledSystem, Dest, Host, TaskInstance, ROOT_CLOSURE};
use super::{GlobalMemory, RuntimeError, Stats};
use crate::cps::{ExplicitSystem, TaskKind};

/// Parameters of the coarse cost model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostConfig {
    /// Cycles per executed statement.
    pub stmt_cost: u64,
    /// Cycles per memory load, store or exchange.
    pub mem_latency: u64,
    /// Processing elements per task type; unlisted types get one.
    pub pe_counts: BTreeMap<String, usize>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { stmt_cost: 1, mem_latency: 100, pe_counts: BTreeMap::new() }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub result: Option<i64>,
    pub makespan: u64,
    /// Busy fraction of each task type's PE pool over the makespan.
    pub utilization: BTreeMap<String, f64>,
    pub stats: Stats,
}

enum Effect {
    Spawn(TaskInstance),
    SpawnNext(ClosureId, Vec<(u32, i64)>),
    Send(Dest, Option<i64>),
}

/// Collects a task's effects; they become visible when its PE finishes.
struct SimHost<'a> {
    sys: &'a CompiledSystem,
    mem: &'a GlobalMemory,
    closures: &'a mut HashMap<ClosureId, ClosureState>,
    next_id: &'a mut ClosureId,
    effects: Vec<Effect>,
}

impl Host for SimHost<'_> {
    fn memory(&self) -> &GlobalMemory {
        self.mem
    }

    fn declare(&mut self, layout: u32, ret: Dest) -> Result<ClosureId, RuntimeError> {
        let id = *self.next_id;
        *self.next_id += 1;
        self.closures.insert(id, ClosureState::new(self.sys, layout, ret));
        Ok(id)
    }

    fn add_child(&mut self, closure: ClosureId) -> Result<(), RuntimeError> {
        // Safe to apply early: the running task still holds a unit of the
        // closure's counter, so it cannot fire.
        self.closures.get_mut(&closure).expect("live closure").add_child();
        Ok(())
    }

    fn spawn(&mut self, task: TaskInstance) -> Result<(), RuntimeError> {
        self.effects.push(Effect::Spawn(task));
        Ok(())
    }

    fn spawn_next(&mut self, closure: ClosureId, fills: Vec<(u32, i64)>) -> Result<(), RuntimeError> {
        self.effects.push(Effect::SpawnNext(closure, fills));
        Ok(())
    }

    fn send(&mut self, dest: Dest, value: Option<i64>) -> Result<(), RuntimeError> {
        self.effects.push(Effect::Send(dest, value));
        Ok(())
    }
}

enum Event {
    Finish { task_type: usize, effects: Vec<Effect> },
    Deliver(Dest, Option<i64>),
}

struct Sim<'a> {
    sys: &'a CompiledSystem,
    closures: HashMap<ClosureId, ClosureState>,
    ready: Vec<VecDeque<TaskInstance>>,
    result: Option<Option<i64>>,
    sends: u64,
}

impl Sim<'_> {
    fn enqueue(&mut self, t: TaskInstance) {
        self.ready[t.task as usize].push_back(t);
    }

    fn update(
        &mut self,
        id: ClosureId,
        f: impl FnOnce(&mut ClosureState, &CompiledSystem) -> Result<bool, RuntimeError>,
    ) -> Result<(), RuntimeError> {
        let state = self.closures.get_mut(&id).expect("closure is live until it fires");
        if f(state, self.sys)? {
            let state = self.closures.remove(&id).unwrap();
            match state.fire(self.sys, id)? {
                Fired::Task(t) => self.enqueue(t),
                Fired::Root(v) => self.result = Some(v),
            }
        }
        Ok(())
    }

    fn send(&mut self, dest: Dest, value: Option<i64>) -> Result<(), RuntimeError> {
        self.sends += 1;
        self.update(dest.closure, |c, sys| c.receive(sys, dest.closure, dest.slot, value))
    }
}

/// Discrete-event simulation of `system` in virtual cycles.
///
/// Each task type runs on its own pool of PEs. A task holds its PE for
/// `stmt_cost` per executed statement plus `mem_latency` per memory
/// operation. An access task holds its PE only for `stmt_cost` to issue the
/// request; its result arrives `mem_latency` cycles after that. Ready tasks
/// are served first come first served. Memory is read and written when a
/// task is dispatched; spawns and sends take effect when it finishes. There
/// is no randomness, so results do not depend on any seed.
pub fn simulate_cost(
    system: &ExplicitSystem,
    args: &[i64],
    memory: &GlobalMemory,
    cost: &CostConfig,
    step_limit: u64,
) -> Result<SimOutcome, RuntimeError> {
    let sys = CompiledSystem::compile(system)?;
    let entry = &sys.tasks[sys.entry as usize];
    if entry.n_params != args.len() {
        return Err(RuntimeError::ArgumentCount { task: entry.name.clone(), expected: entry.n_params, got: args.len() });
    }
    for name in cost.pe_counts.keys() {
        if !sys.tasks.iter().any(|t| &t.name == name) {
            return Err(RuntimeError::BadConfig(format!("PE count given for unknown task `{name}`")));
        }
    }
    let pes: Vec<usize> = sys.tasks.iter().map(|t| cost.pe_counts.get(&t.name).copied().unwrap_or(1)).collect();
    if let Some(i) = pes.iter().position(|&n| n == 0) {
        return Err(RuntimeError::BadConfig(format!("task `{}` needs at least one PE", sys.tasks[i].name)));
    }

    let n = sys.tasks.len();
    let mut sim = Sim {
        sys: &sys,
        closures: HashMap::from([(ROOT_CLOSURE, ClosureState::root())]),
        ready: (0..n).map(|_| VecDeque::new()).collect(),
        result: None,
        sends: 0,
    };
    let mut idle = pes.clone();
    let mut busy = vec![0u64; n];
    let mut executed = vec![0u64; n];
    let mut next_id: ClosureId = 1;
    let mut closures_created = 0u64;
    let mut steps = 0u64;
    let mut events: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    let mut payloads: HashMap<u64, Event> = HashMap::new();
    let mut seq = 0u64;
    let mut now = 0u64;
    let mut makespan = None;

    let root_slot = sys.entry_returns_value.then_some(0);
    sim.enqueue(TaskInstance { task: sys.entry, args: args.to_vec(), ret: Dest { closure: ROOT_CLOSURE, slot: root_slot } });

    loop {
        for ty in 0..n {
            while idle[ty] > 0 {
                let Some(task) = sim.ready[ty].pop_front() else { break };
                idle[ty] -= 1;
                executed[ty] += 1;
                let mut host = SimHost {
                    sys: &sys,
                    mem: memory,
                    closures: &mut sim.closures,
                    next_id: &mut next_id,
                    effects: Vec::new(),
                };
                let before = *host.next_id;
                let used = execute(&sys, &task, &mut host, step_limit.saturating_sub(steps))
                    .map_err(|e| if let RuntimeError::StepLimit(_) = e { RuntimeError::StepLimit(step_limit) } else { e })?;
                closures_created += *host.next_id - before;
                let effects = host.effects;
                steps += used.stmts;
                let duration = if sys.tasks[ty].kind == TaskKind::Access {
                    cost.stmt_cost
                } else {
                    used.stmts * cost.stmt_cost + used.mem_ops * cost.mem_latency
                };
                busy[ty] += duration;
                events.push(Reverse((now + duration, seq)));
                payloads.insert(seq, Event::Finish { task_type: ty, effects });
                seq += 1;
            }
        }
        let Some(Reverse((time, id))) = events.pop() else { break };
        now = time;
        match payloads.remove(&id).expect("event payload") {
            Event::Finish { task_type, effects } => {
                idle[task_type] += 1;
                let delayed = sys.tasks[task_type].kind == TaskKind::Access;
                for effect in effects {
                    match effect {
                        Effect::Spawn(t) => sim.enqueue(t),
                        Effect::SpawnNext(c, fills) => sim.update(c, |s, sys| s.issue_next(sys, c, &fills))?,
                        Effect::Send(dest, value) if delayed => {
                            events.push(Reverse((now + cost.mem_latency, seq)));
                            payloads.insert(seq, Event::Deliver(dest, value));
                            seq += 1;
                        }
                        Effect::Send(dest, value) => sim.send(dest, value)?,
                    }
                }
            }
            Event::Deliver(dest, value) => sim.send(dest, value)?,
        }
        if makespan.is_none() && sim.result.is_some() {
            makespan = Some(now);
        }
    }

    let Some(result) = sim.result else {
        let mut ids: Vec<_> = sim.closures.keys().copied().collect();
        ids.sort_unstable();
        let dump = ids.iter().map(|id| sim.closures[id].describe(&sys, *id)).collect::<Vec<_>>().join("\n");
        return Err(RuntimeError::Deadlock { dump });
    };
    let makespan = makespan.unwrap_or(0);
    let utilization: BTreeMap<String, f64> = sys
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let capacity = makespan as f64 * pes[i] as f64;
            (t.name.clone(), if capacity > 0.0 { busy[i] as f64 / capacity } else { 0.0 })
        })
        .collect();
    let mut stats = Stats::new();
    stats.tasks_executed = sys.task_names().into_iter().zip(executed).collect();
    stats.closures_created = closures_created;
    stats.send_arguments = sim.sends;
    stats.makespan = Some(makespan);
    stats.utilization = Some(utilization.clone());
    Ok(SimOutcome { result, makespan, utilization, stats })
}
