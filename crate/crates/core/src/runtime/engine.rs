//! Explicit IR compiled to index-addressed form and the interpreter shared
//! by the parallel runtime and the simulator.

use std::collections::HashMap;

use super::{apply_binop, GlobalMemory, RuntimeError};
use crate::cps::{ExStmtKind, ExTerminator, ExplicitSystem, JoinPolicy, SpawnDest, TaskKind};
use crate::frontend::{BinOp, Expr, UnOp};

pub(crate) type ClosureId = u64;
/// The root closure receives the entry task's result.
pub(crate) const ROOT_CLOSURE: ClosureId = 0;

/// Where a finished task reports: a slot of a closure, or only its counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dest {
    pub closure: ClosureId,
    pub slot: Option<u32>,
}

#[derive(Debug, Clone)]
pub(crate) struct TaskInstance {
    pub task: u32,
    pub args: Vec<i64>,
    pub ret: Dest,
}

#[derive(Debug)]
enum CExpr {
    Const(i64),
    Local(u32),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Neg(Box<CExpr>),
    Not(Box<CExpr>),
    Load(Box<CExpr>),
    Xchg(Box<CExpr>, Box<CExpr>),
}

#[derive(Debug)]
enum CDest {
    Field { handle: u32, slot: u32 },
    Counter { handle: u32 },
    Parent,
}

#[derive(Debug)]
enum CStmt {
    Set(u32, CExpr),
    Store(CExpr, CExpr),
    Declare { handle: u32, layout: u32 },
    Spawn { task: u32, args: Vec<CExpr>, dest: CDest },
}

#[derive(Debug)]
enum CTerm {
    If(CExpr, u32, u32),
    Goto(u32),
    While(CExpr, u32, u32),
    Return(Option<CExpr>),
    SpawnNext(u32),
}

#[derive(Debug)]
struct CBlock {
    stmts: Vec<CStmt>,
    term: CTerm,
}

#[derive(Debug)]
pub(crate) struct CTask {
    pub name: String,
    pub kind: TaskKind,
    pub n_params: usize,
    n_locals: usize,
    n_handles: usize,
    blocks: Vec<CBlock>,
    entry: u32,
}

#[derive(Debug)]
pub(crate) struct CLayout {
    pub continuation: u32,
    /// Ready arguments followed by placeholders, as locals of the declaring task.
    sources: Vec<u32>,
    pub n_ready: usize,
    pub join: JoinPolicy,
    pub field_names: Vec<String>,
}

impl CLayout {
    pub fn n_slots(&self) -> usize {
        self.sources.len()
    }
}

#[derive(Debug)]
pub(crate) struct CompiledSystem {
    pub tasks: Vec<CTask>,
    pub layouts: Vec<CLayout>,
    pub entry: u32,
    pub entry_returns_value: bool,
}

struct TaskCompiler<'a> {
    task_index: &'a HashMap<String, u32>,
    locals: HashMap<String, u32>,
    handles: HashMap<String, u32>,
    block_index: HashMap<usize, u32>,
}

impl TaskCompiler<'_> {
    fn local(&mut self, name: &str) -> u32 {
        let n = self.locals.len() as u32;
        *self.locals.entry(name.to_string()).or_insert(n)
    }

    fn expr(&mut self, e: &Expr) -> CExpr {
        match e {
            Expr::Int(v) => CExpr::Const(*v),
            Expr::Var(v) => CExpr::Local(self.local(v)),
            Expr::Binary(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
            Expr::Unary(UnOp::Neg, a) => CExpr::Neg(Box::new(self.expr(a))),
            Expr::Unary(UnOp::Not, a) => CExpr::Not(Box::new(self.expr(a))),
            Expr::MemLoad(a) => CExpr::Load(Box::new(self.expr(a))),
            Expr::MemXchg(a, v) => CExpr::Xchg(Box::new(self.expr(a)), Box::new(self.expr(v))),
        }
    }

    fn block(&self, id: usize) -> u32 {
        self.block_index[&id]
    }
}

impl CompiledSystem {
    pub fn compile(system: &ExplicitSystem) -> Result<Self, RuntimeError> {
        let task_index: HashMap<String, u32> =
            system.tasks.iter().enumerate().map(|(i, t)| (t.name.clone(), i as u32)).collect();
        let lookup = |name: &str| task_index.get(name).copied().ok_or_else(|| RuntimeError::UnknownTask(name.to_string()));
        let entry = lookup(&system.entry)?;
        let mut tasks = Vec::new();
        let mut layouts = Vec::new();
        for t in &system.tasks {
            let mut c = TaskCompiler {
                task_index: &task_index,
                locals: HashMap::new(),
                handles: HashMap::new(),
                block_index: t.blocks.iter().enumerate().map(|(i, b)| (b.id, i as u32)).collect(),
            };
            for p in &t.params {
                c.local(p);
            }
            // Handles are numbered first so spawns can refer to them.
            for (h, _) in t.declared_closures() {
                let n = c.handles.len() as u32;
                c.handles.insert(h.to_string(), n);
            }
            let mut blocks = Vec::new();
            for b in &t.blocks {
                let mut stmts = Vec::new();
                for s in &b.stmts {
                    stmts.push(match &s.kind {
                        ExStmtKind::Let { name, value } | ExStmtKind::Assign { name, value } => {
                            let v = c.expr(value);
                            CStmt::Set(c.local(name), v)
                        }
                        ExStmtKind::MemStore { addr, value } => CStmt::Store(c.expr(addr), c.expr(value)),
                        ExStmtKind::DeclareClosure { handle, layout } => {
                            let sources = layout.params().iter().map(|v| c.local(v)).collect();
                            layouts.push(CLayout {
                                continuation: lookup(&layout.continuation)?,
                                sources,
                                n_ready: layout.ready_args.len(),
                                join: layout.join,
                                field_names: layout.params(),
                            });
                            CStmt::Declare { handle: c.handles[handle], layout: layouts.len() as u32 - 1 }
                        }
                        ExStmtKind::SpawnTask { callee, args, dest } => {
                            let task = *c.task_index.get(callee).ok_or_else(|| RuntimeError::UnknownTask(callee.clone()))?;
                            let args = args.iter().map(|a| c.expr(a)).collect();
                            let dest = match dest {
                                SpawnDest::Field { handle, field } => {
                                    let layout = t.closure_layout(handle).expect("declared handle");
                                    let slot = layout.params().iter().position(|p| p == field).expect("field in layout");
                                    CDest::Field { handle: c.handles[handle], slot: slot as u32 }
                                }
                                SpawnDest::Counter { handle } => CDest::Counter { handle: c.handles[handle] },
                                SpawnDest::Parent => CDest::Parent,
                            };
                            CStmt::Spawn { task, args, dest }
                        }
                    });
                }
                let term = match &b.terminator {
                    ExTerminator::If { cond, then_block, else_block, .. } => {
                        CTerm::If(c.expr(cond), c.block(*then_block), c.block(*else_block))
                    }
                    ExTerminator::Goto(b) => CTerm::Goto(c.block(*b)),
                    ExTerminator::While { cond, body, exit } => CTerm::While(c.expr(cond), c.block(*body), c.block(*exit)),
                    ExTerminator::Return(e) => CTerm::Return(e.as_ref().map(|e| c.expr(e))),
                    ExTerminator::SpawnNext { handle } => CTerm::SpawnNext(c.handles[handle]),
                };
                blocks.push(CBlock { stmts, term });
            }
            tasks.push(CTask {
                name: t.name.clone(),
                kind: t.kind,
                n_params: t.params.len(),
                n_locals: c.locals.len(),
                n_handles: c.handles.len(),
                entry: c.block(t.entry),
                blocks,
            });
        }
        let entry_returns_value = system.tasks[entry as usize].returns_value;
        Ok(CompiledSystem { tasks, layouts, entry, entry_returns_value })
    }

    pub fn task_names(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.name.clone()).collect()
    }
}

/// Side effects of running a task, supplied by the scheduler.
pub(crate) trait Host {
    fn memory(&self) -> &GlobalMemory;
    /// Allocates a closure whose join counter holds one extra unit, released
    /// by `spawn_next`.
    fn declare(&mut self, layout: u32, ret: Dest) -> Result<ClosureId, RuntimeError>;
    /// Announces one more child for `closure` (dynamic joins and forwarding).
    fn add_child(&mut self, closure: ClosureId) -> Result<(), RuntimeError>;
    fn spawn(&mut self, task: TaskInstance) -> Result<(), RuntimeError>;
    /// Fills the listed slots and releases the declaring task's unit.
    fn spawn_next(&mut self, closure: ClosureId, fills: Vec<(u32, i64)>) -> Result<(), RuntimeError>;
    fn send(&mut self, dest: Dest, value: Option<i64>) -> Result<(), RuntimeError>;
}

/// Work done by one task execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct TaskCost {
    pub stmts: u64,
    pub mem_ops: u64,
}

struct Exec<'a, H: Host> {
    locals: Vec<i64>,
    host: &'a mut H,
    cost: TaskCost,
}

impl<H: Host> Exec<'_, H> {
    fn eval(&mut self, e: &CExpr) -> Result<i64, RuntimeError> {
        Ok(match e {
            CExpr::Const(v) => *v,
            CExpr::Local(i) => self.locals[*i as usize],
            CExpr::Bin(BinOp::And, a, b) => i64::from(self.eval(a)? != 0 && self.eval(b)? != 0),
            CExpr::Bin(BinOp::Or, a, b) => i64::from(self.eval(a)? != 0 || self.eval(b)? != 0),
            CExpr::Bin(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                apply_binop(*op, a, b)?
            }
            CExpr::Neg(a) => self.eval(a)?.wrapping_neg(),
            CExpr::Not(a) => i64::from(self.eval(a)? == 0),
            CExpr::Load(a) => {
                let addr = self.eval(a)?;
                self.cost.mem_ops += 1;
                self.host.memory().load(addr)?
            }
            CExpr::Xchg(a, v) => {
                let addr = self.eval(a)?;
                let v = self.eval(v)?;
                self.cost.mem_ops += 1;
                self.host.memory().xchg(addr, v)?
            }
        })
    }
}

/// Runs one task instance to completion. Statements are counted for the
/// cost model: every executed statement, branch condition, return and
/// spawn_next costs one; closure declarations and jumps are free.
pub(crate) fn execute<H: Host>(
    sys: &CompiledSystem,
    inst: &TaskInstance,
    host: &mut H,
    step_limit: u64,
) -> Result<TaskCost, RuntimeError> {
    let task = &sys.tasks[inst.task as usize];
    let mut locals = vec![0i64; task.n_locals];
    locals[..inst.args.len()].copy_from_slice(&inst.args);
    let mut ex = Exec { locals, host, cost: TaskCost::default() };
    // Per handle: closure id and which slots a spawn has claimed.
    let mut handles: Vec<(ClosureId, u32, Vec<bool>)> = vec![(0, 0, Vec::new()); task.n_handles];
    let mut block = &task.blocks[task.entry as usize];
    loop {
        for s in &block.stmts {
            match s {
                CStmt::Set(i, e) => {
                    let v = ex.eval(e)?;
                    ex.locals[*i as usize] = v;
                }
                CStmt::Store(a, v) => {
                    let a = ex.eval(a)?;
                    let v = ex.eval(v)?;
                    ex.cost.mem_ops += 1;
                    ex.host.memory().store(a, v)?;
                }
                CStmt::Declare { handle, layout } => {
                    let id = ex.host.declare(*layout, inst.ret)?;
                    let slots = sys.layouts[*layout as usize].n_slots();
                    handles[*handle as usize] = (id, *layout, vec![false; slots]);
                    continue;
                }
                CStmt::Spawn { task: callee, args, dest } => {
                    let args = args.iter().map(|a| ex.eval(a)).collect::<Result<Vec<_>, _>>()?;
                    let dest = match dest {
                        CDest::Field { handle, slot } => {
                            let (id, layout, claimed) = &mut handles[*handle as usize];
                            claimed[*slot as usize] = true;
                            if sys.layouts[*layout as usize].join == JoinPolicy::Dynamic {
                                ex.host.add_child(*id)?;
                            }
                            Dest { closure: *id, slot: Some(*slot) }
                        }
                        CDest::Counter { handle } => {
                            let (id, layout, _) = &handles[*handle as usize];
                            if sys.layouts[*layout as usize].join == JoinPolicy::Dynamic {
                                ex.host.add_child(*id)?;
                            }
                            Dest { closure: *id, slot: None }
                        }
                        CDest::Parent => {
                            ex.host.add_child(inst.ret.closure)?;
                            Dest { closure: inst.ret.closure, slot: None }
                        }
                    };
                    ex.host.spawn(TaskInstance { task: *callee, args, ret: dest })?;
                }
            }
            ex.cost.stmts += 1;
            if ex.cost.stmts > step_limit {
                return Err(RuntimeError::StepLimit(step_limit));
            }
        }
        ex.cost.stmts += 1;
        if ex.cost.stmts > step_limit {
            return Err(RuntimeError::StepLimit(step_limit));
        }
        block = match &block.term {
            CTerm::If(c, t, e) => &task.blocks[if ex.eval(c)? != 0 { *t } else { *e } as usize],
            CTerm::While(c, b, x) => &task.blocks[if ex.eval(c)? != 0 { *b } else { *x } as usize],
            CTerm::Goto(b) => {
                ex.cost.stmts -= 1;
                &task.blocks[*b as usize]
            }
            CTerm::Return(e) => {
                let v = e.as_ref().map(|e| ex.eval(e)).transpose()?;
                ex.host.send(inst.ret, v)?;
                return Ok(ex.cost);
            }
            CTerm::SpawnNext(handle) => {
                let (id, layout, claimed) = &handles[*handle as usize];
                let l = &sys.layouts[*layout as usize];
                // Ready arguments always, plus placeholders no spawn claimed
                // on the path taken (they keep their current local value).
                let fills = l
                    .sources
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i < l.n_ready || !claimed[*i])
                    .map(|(i, src)| (i as u32, ex.locals[*src as usize]))
                    .collect();
                ex.host.spawn_next(*id, fills)?;
                return Ok(ex.cost);
            }
        };
    }
}
