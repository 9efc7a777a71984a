//! Decoupled access-execute fission.
//!
//! A statement marked with `#pragma bombyx dae` is moved into a fresh task
//! `<fn>__access<k>` whose parameters are the statement's free variables.
//! In its place the caller spawns that task and syncs, so after CPS
//! conversion the code following the access becomes a continuation that is
//! only scheduled once the loaded value has arrived.

use crate::frontend::{Diagnostic, DiagnosticKind, Expr};
use crate::implicit_ir::{
    BasicBlock, BlockId, FunctionOrigin, ImplicitFunction, ImplicitProgram, IrStmt, IrStmtKind, Terminator,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaeSite {
    pub function: String,
    pub block: BlockId,
    pub index: usize,
    /// Free variables of the wrapped statement, in first-use order.
    pub live_ins: Vec<String>,
    /// Variable the statement defines; `None` for a memory store.
    pub defined: Option<String>,
}

/// Pragma-marked statements of `f`, in program order.
pub fn find_dae_sites(f: &ImplicitFunction) -> Vec<DaeSite> {
    let mut out = Vec::new();
    for b in &f.blocks {
        for (index, s) in b.stmts.iter().enumerate().filter(|(_, s)| s.dae) {
            out.push(DaeSite {
                function: f.name.clone(),
                block: b.id,
                index,
                live_ins: s.kind.uses(),
                defined: s.kind.defined().map(str::to_string),
            });
        }
    }
    out
}

pub fn access_task_name(function: &str, ordinal: usize) -> String {
    format!("{function}__access{ordinal}")
}

fn access_function(name: String, stmt: &IrStmt, live_ins: &[String], defined: &Option<String>) -> ImplicitFunction {
    let ret = Terminator::Return(defined.as_ref().map(|d| Expr::Var(d.clone())));
    ImplicitFunction {
        name,
        params: live_ins.to_vec(),
        returns_value: defined.is_some(),
        is_task: true,
        blocks: vec![BasicBlock {
            id: 0,
            stmts: vec![IrStmt { kind: stmt.kind.clone(), dae: false, span: stmt.span }],
            terminator: ret,
            loop_depth: 0,
        }],
        entry: 0,
        origin: FunctionOrigin::DaeAccess,
    }
}

fn transform_function(f: &ImplicitFunction, diags: &mut Vec<Diagnostic>) -> Vec<ImplicitFunction> {
    let mut f = f.clone();
    let mut accesses = Vec::new();
    let original_blocks = f.blocks.len();
    for start in 0..original_blocks {
        let mut cur = start;
        while let Some(index) = f.blocks[cur].stmts.iter().position(|s| s.dae) {
            let stmt = f.blocks[cur].stmts[index].clone();
            if f.blocks[cur].loop_depth > 0 {
                diags.push(Diagnostic::at(
                    DiagnosticKind::DaeInLoop,
                    format!(
                        "DAE pragma in a loop body of `{}` would place a sync inside the loop, which is not supported",
                        f.name
                    ),
                    stmt.span,
                ));
                f.blocks[cur].stmts[index].dae = false;
                continue;
            }
            let live_ins = stmt.kind.uses();
            let defined = stmt.kind.defined().map(str::to_string);
            let name = access_task_name(&f.name, accesses.len());
            accesses.push(access_function(name.clone(), &stmt, &live_ins, &defined));

            let args: Vec<Expr> = live_ins.iter().map(|v| Expr::Var(v.clone())).collect();
            let spawn = match &defined {
                Some(dest) => IrStmtKind::SpawnAssign { dest: dest.clone(), callee: name, args },
                None => IrStmtKind::SpawnVoid { callee: name, args },
            };
            let next = f.blocks.len();
            let block = &mut f.blocks[cur];
            let rest = block.stmts.split_off(index + 1);
            block.stmts[index] = IrStmt { kind: spawn, dae: false, span: stmt.span };
            let old_term = std::mem::replace(&mut block.terminator, Terminator::Sync(next));
            let loop_depth = block.loop_depth;
            f.blocks.push(BasicBlock { id: next, stmts: rest, terminator: old_term, loop_depth });
            cur = next;
        }
    }
    let mut out = vec![f];
    out.extend(accesses);
    out
}

/// Splits every pragma-marked statement into its own access task. The
/// result carries no pragma marks, so applying the pass again is a no-op.
pub fn apply_dae(program: &ImplicitProgram) -> Result<ImplicitProgram, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut functions = Vec::new();
    for f in &program.functions {
        functions.extend(transform_function(f, &mut diags));
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(ImplicitProgram { functions, entry: program.entry.clone() })
}

/// Drops every pragma mark (used when DAE is switched off).
pub fn strip_dae_marks(program: &ImplicitProgram) -> ImplicitProgram {
    let mut p = program.clone();
    for f in &mut p.functions {
        for b in &mut f.blocks {
            for s in &mut b.stmts {
                s.dae = false;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::implicit_ir::{build_program, dump_program};

    fn implicit(src: &str) -> ImplicitProgram {
        build_program(&compile_source(src, None).unwrap())
    }

    const SUM: &str = "task i64 f(i64 p, i64 q) {\n#pragma bombyx dae\nlet a = mem[p] + mem[q];\nreturn a * 2;\n}";

    #[test]
    fn sum_of_two_loads_becomes_access_task() {
        let p = implicit(SUM);
        let sites = find_dae_sites(&p.functions[0]);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].live_ins, vec!["p", "q"]);
        assert_eq!(sites[0].defined.as_deref(), Some("a"));

        let out = apply_dae(&p).unwrap();
        assert_eq!(out.functions.len(), 2);
        let access = &out.functions[1];
        assert_eq!(access.name, "f__access0");
        assert_eq!(access.params, vec!["p", "q"]);
        assert!(access.returns_value);
        assert_eq!(access.origin, FunctionOrigin::DaeAccess);
        assert_eq!(access.blocks[0].terminator, Terminator::Return(Some(Expr::var("a"))));

        let caller = &out.functions[0];
        assert_eq!(caller.blocks[0].terminator, Terminator::Sync(1));
        assert!(matches!(
            &caller.blocks[0].stmts[0].kind,
            IrStmtKind::SpawnAssign { dest, callee, .. } if dest == "a" && callee == "f__access0"
        ));
        assert!(matches!(caller.blocks[1].terminator, Terminator::Return(Some(_))));
    }

    #[test]
    fn no_pragmas_is_identity() {
        let p = implicit("task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); sync; return x; }");
        let out = apply_dae(&p).unwrap();
        assert_eq!(dump_program(&out), dump_program(&p));
    }

    #[test]
    fn idempotent() {
        let once = apply_dae(&implicit(SUM)).unwrap();
        let twice = apply_dae(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn store_becomes_void_access() {
        let p = implicit("task void f(i64 a, i64 v) {\n#pragma bombyx dae\nmem[a] = v;\nmem[a + 1] = v;\n}");
        let out = apply_dae(&p).unwrap();
        let access = &out.functions[1];
        assert!(!access.returns_value);
        assert_eq!(access.params, vec!["a", "v"]);
        assert!(matches!(out.functions[0].blocks[0].stmts[0].kind, IrStmtKind::SpawnVoid { .. }));
    }

    #[test]
    fn self_referencing_assignment_passes_old_value() {
        let p = implicit("task i64 f(i64 x) {\n#pragma bombyx dae\nx = mem[x];\nreturn x;\n}");
        let out = apply_dae(&p).unwrap();
        assert_eq!(out.functions[1].params, vec!["x"]);
        assert_eq!(out.functions[1].blocks[0].terminator, Terminator::Return(Some(Expr::var("x"))));
    }

    #[test]
    fn multiple_pragmas_get_ordinals_in_program_order() {
        let p = implicit(
            "task i64 f(i64 a) {\n#pragma bombyx dae\nlet b = mem[a];\n#pragma bombyx dae\nlet c = mem[b];\nreturn c;\n}",
        );
        let out = apply_dae(&p).unwrap();
        let names: Vec<&str> = out.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["f", "f__access0", "f__access1"]);
        assert_eq!(out.functions[0].sync_blocks().len(), 2);
    }

    #[test]
    fn pragma_in_loop_is_rejected() {
        let p = implicit("task void f(i64 k) {\nwhile (k > 0) {\n#pragma bombyx dae\nk = mem[k];\n}\n}");
        let diags = apply_dae(&p).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DaeInLoop);
    }
}
