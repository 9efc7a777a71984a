use super::engine::{ClosureId, CompiledSystem, Dest, TaskInstance, ROOT_CLOSURE};
use super::RuntimeError;
use crate::cps::JoinPolicy;

/// Marks the root closure, which has no layout.
const NO_LAYOUT: u32 = u32::MAX;

/// Runtime state of one closure.
///
/// `counter` starts at the static child count plus one; the extra unit is
/// released by `spawn_next`, so a closure can never fire before the task
/// that declared it has finished spawning. Dynamic joins start at one and
/// grow with every executed spawn.
#[derive(Debug, Clone)]
pub(crate) struct ClosureState {
    layout: u32,
    ret: Dest,
    slots: Vec<i64>,
    filled: Vec<bool>,
    counter: i64,
    expected: u64,
    received: u64,
}

/// What happens when a closure's counter reaches zero.
#[derive(Debug)]
pub(crate) enum Fired {
    Task(TaskInstance),
    Root(Option<i64>),
}

impl ClosureState {
    pub fn new(sys: &CompiledSystem, layout: u32, ret: Dest) -> Self {
        let l = &sys.layouts[layout as usize];
        let k = match l.join {
            JoinPolicy::Static(k) => k as u64,
            JoinPolicy::Dynamic => 0,
        };
        ClosureState {
            layout,
            ret,
            slots: vec![0; l.n_slots()],
            filled: vec![false; l.n_slots()],
            counter: k as i64 + 1,
            expected: k,
            received: 0,
        }
    }

    /// Receives the entry task's completion.
    pub fn root() -> Self {
        ClosureState {
            layout: NO_LAYOUT,
            ret: Dest { closure: ROOT_CLOSURE, slot: None },
            slots: vec![0],
            filled: vec![false],
            counter: 1,
            expected: 1,
            received: 0,
        }
    }

    pub fn add_child(&mut self) {
        self.counter += 1;
        self.expected += 1;
    }

    fn field_name(&self, sys: &CompiledSystem, slot: usize) -> String {
        match sys.layouts.get(self.layout as usize) {
            Some(l) => l.field_names[slot].clone(),
            None => "result".to_string(),
        }
    }

    fn write(&mut self, sys: &CompiledSystem, id: ClosureId, slot: u32, value: i64) -> Result<(), RuntimeError> {
        let s = slot as usize;
        if std::mem::replace(&mut self.filled[s], true) {
            return Err(RuntimeError::DoubleWrite { closure: id, field: self.field_name(sys, s) });
        }
        self.slots[s] = value;
        Ok(())
    }

    fn decrement(&mut self, id: ClosureId) -> Result<bool, RuntimeError> {
        self.counter -= 1;
        if self.counter < 0 {
            return Err(RuntimeError::CounterUnderflow { closure: id });
        }
        Ok(self.counter == 0)
    }

    /// Applies a child's send; true when the closure is now complete.
    pub fn receive(
        &mut self,
        sys: &CompiledSystem,
        id: ClosureId,
        slot: Option<u32>,
        value: Option<i64>,
    ) -> Result<bool, RuntimeError> {
        if let (Some(slot), Some(v)) = (slot, value) {
            self.write(sys, id, slot, v)?;
        }
        self.received += 1;
        self.decrement(id)
    }

    pub fn issue_next(&mut self, sys: &CompiledSystem, id: ClosureId, fills: &[(u32, i64)]) -> Result<bool, RuntimeError> {
        for &(slot, v) in fills {
            self.write(sys, id, slot, v)?;
        }
        self.decrement(id)
    }

    /// Retires a complete closure, checking that it got exactly the
    /// arguments it was promised.
    pub fn fire(self, sys: &CompiledSystem, id: ClosureId) -> Result<Fired, RuntimeError> {
        if self.counter != 0 || self.received != self.expected {
            return Err(RuntimeError::Conservation { closure: id, expected: self.expected, received: self.received });
        }
        if self.layout == NO_LAYOUT {
            return Ok(Fired::Root(self.filled[0].then_some(self.slots[0])));
        }
        let l = &sys.layouts[self.layout as usize];
        Ok(Fired::Task(TaskInstance { task: l.continuation, args: self.slots, ret: self.ret }))
    }

    pub fn describe(&self, sys: &CompiledSystem, id: ClosureId) -> String {
        let name = match sys.layouts.get(self.layout as usize) {
            Some(l) => sys.tasks[l.continuation as usize].name.as_str(),
            None => "<root>",
        };
        format!(
            "closure {id} -> {name}: counter {}, received {}/{}, filled {:?}",
            self.counter, self.received, self.expected, self.filled
        )
    }
}
