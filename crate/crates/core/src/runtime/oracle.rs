use std::collections::{BTreeMap, HashMap};

use super::{apply_binop, GlobalMemory, RuntimeError};
use crate::frontend::{BinOp, Expr, UnOp};
use crate::implicit_ir::{BlockId, ImplicitProgram, IrStmtKind, Terminator};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub result: Option<i64>,
    /// Calls per function, the entry included.
    pub calls: BTreeMap<String, u64>,
    pub steps: u64,
}

fn eval(e: &Expr, env: &HashMap<String, i64>, mem: &GlobalMemory) -> Result<i64, RuntimeError> {
    Ok(match e {
        Expr::Int(v) => *v,
        Expr::Var(name) => *env.get(name).unwrap_or(&0),
        Expr::Binary(BinOp::And, a, b) => i64::from(eval(a, env, mem)? != 0 && eval(b, env, mem)? != 0),
        Expr::Binary(BinOp::Or, a, b) => i64::from(eval(a, env, mem)? != 0 || eval(b, env, mem)? != 0),
        Expr::Binary(op, a, b) => {
            let a = eval(a, env, mem)?;
            apply_binop(*op, a, eval(b, env, mem)?)?
        }
        Expr::Unary(UnOp::Neg, a) => eval(a, env, mem)?.wrapping_neg(),
        Expr::Unary(UnOp::Not, a) => i64::from(eval(a, env, mem)? == 0),
        Expr::MemLoad(a) => mem.load(eval(a, env, mem)?)?,
        Expr::MemXchg(a, v) => {
            let addr = eval(a, env, mem)?;
            mem.xchg(addr, eval(v, env, mem)?)?
        }
    })
}

struct Frame {
    function: usize,
    env: HashMap<String, i64>,
    block: BlockId,
    index: usize,
    /// Variable receiving the result of the call this frame is waiting on.
    pending: Option<String>,
}

/// Runs `program` from its entry with spawns executed as ordinary calls.
/// Frames live on an explicit stack, so deep recursion cannot overflow the
/// native one.
pub fn run_sequential_oracle(
    program: &ImplicitProgram,
    args: &[i64],
    mem: &GlobalMemory,
    step_limit: u64,
) -> Result<OracleOutcome, RuntimeError> {
    let index: HashMap<&str, usize> =
        program.functions.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
    let mut calls: BTreeMap<String, u64> = BTreeMap::new();
    let enter = |name: &str, args: Vec<i64>, calls: &mut BTreeMap<String, u64>| -> Result<Frame, RuntimeError> {
        let &function = index.get(name).ok_or_else(|| RuntimeError::UnknownTask(name.to_string()))?;
        let f = &program.functions[function];
        if f.params.len() != args.len() {
            return Err(RuntimeError::ArgumentCount {
                task: name.to_string(),
                expected: f.params.len(),
                got: args.len(),
            });
        }
        *calls.entry(f.name.clone()).or_default() += 1;
        Ok(Frame { function, env: f.params.iter().cloned().zip(args).collect(), block: f.entry, index: 0, pending: None })
    };

    let mut stack = vec![enter(&program.entry, args.to_vec(), &mut calls)?];
    let mut steps: u64 = 0;
    loop {
        steps += 1;
        if steps > step_limit {
            return Err(RuntimeError::StepLimit(step_limit));
        }
        let frame = stack.last_mut().expect("stack is non-empty while running");
        let block = program.functions[frame.function].block(frame.block);
        if let Some(stmt) = block.stmts.get(frame.index) {
            frame.index += 1;
            match &stmt.kind {
                IrStmtKind::Let { name, value } | IrStmtKind::Assign { name, value } => {
                    let v = eval(value, &frame.env, mem)?;
                    frame.env.insert(name.clone(), v);
                }
                IrStmtKind::MemStore { addr, value } => {
                    let a = eval(addr, &frame.env, mem)?;
                    mem.store(a, eval(value, &frame.env, mem)?)?;
                }
                IrStmtKind::SpawnAssign { callee, args, .. } | IrStmtKind::SpawnVoid { callee, args } => {
                    let values = args.iter().map(|a| eval(a, &frame.env, mem)).collect::<Result<Vec<_>, _>>()?;
                    frame.pending = stmt.kind.defined().map(str::to_string);
                    let callee_frame = enter(callee, values, &mut calls)?;
                    stack.push(callee_frame);
                }
            }
            continue;
        }
        match &block.terminator {
            Terminator::If { cond, then_block, else_block, .. } => {
                frame.block = if eval(cond, &frame.env, mem)? != 0 { *then_block } else { *else_block };
                frame.index = 0;
            }
            Terminator::While { cond, body, exit } => {
                frame.block = if eval(cond, &frame.env, mem)? != 0 { *body } else { *exit };
                frame.index = 0;
            }
            Terminator::Goto(b) | Terminator::Sync(b) => {
                frame.block = *b;
                frame.index = 0;
            }
            Terminator::Return(e) => {
                let value = e.as_ref().map(|e| eval(e, &frame.env, mem)).transpose()?;
                stack.pop();
                match stack.last_mut() {
                    None => return Ok(OracleOutcome { result: value, calls, steps }),
                    Some(caller) => {
                        if let (Some(dest), Some(v)) = (caller.pending.take(), value) {
                            caller.env.insert(dest, v);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::build_program;

    fn run(src: &str, args: &[i64], mem: &GlobalMemory) -> Result<OracleOutcome, RuntimeError> {
        run_sequential_oracle(&build_program(&compile_source(src, None).unwrap()), args, mem, 1_000_000)
    }

    const FIB: &str = "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }";

    #[test]
    fn fibonacci_matches_closed_form() {
        let mem = GlobalMemory::new(0);
        let (mut a, mut b) = (0i64, 1i64);
        for n in 0..=20 {
            assert_eq!(run(FIB, &[n], &mem).unwrap().result, Some(a), "fib({n})");
            (a, b) = (b, a + b);
        }
        assert_eq!(run(FIB, &[10], &mem).unwrap().result, Some(55));
    }

    #[test]
    fn memory_effects_and_errors() {
        let mem = GlobalMemory::new(4);
        let out = run("task void f(i64 a) { mem[a] = 7; mem[a + 1] = mem[a] * 2; }", &[1], &mem).unwrap();
        assert_eq!(out.result, None);
        assert_eq!(mem.to_vec(), vec![0, 7, 14, 0]);
        assert_eq!(
            run("task void f(i64 a) { mem[a] = 1; }", &[4], &mem).unwrap_err(),
            RuntimeError::OutOfBounds { addr: 4, size: 4 }
        );
        assert_eq!(run("task i64 f(i64 a) { return 1 / a; }", &[0], &mem).unwrap_err(), RuntimeError::DivisionByZero);
        assert!(matches!(run(FIB, &[], &mem), Err(RuntimeError::ArgumentCount { .. })));
    }

    #[test]
    fn step_limit_stops_infinite_loops() {
        let p = build_program(&compile_source("task i64 f() { while (1) { } return 0; }", None).unwrap());
        assert_eq!(run_sequential_oracle(&p, &[], &GlobalMemory::new(0), 1000), Err(RuntimeError::StepLimit(1000)));
    }

    #[test]
    fn short_circuit_skips_memory_access() {
        let out = run("task i64 f(i64 a) { return a != 0 && mem[99] == 1; }", &[0], &GlobalMemory::new(1)).unwrap();
        assert_eq!(out.result, Some(0));
    }
}
