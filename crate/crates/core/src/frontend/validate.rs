//! Semantic checks and the implicit-sync normalization.
//!
//! [`validate`] reports every violation it finds. [`insert_implicit_syncs`]
//! then makes function exits explicit: a void function that falls off its
//! end gets a `return;`, and every `return` reachable while spawns may still
//! be pending gets a `sync;` in front of it.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::diagnostic::{Diagnostic, DiagnosticKind as K, Span};

struct FnSig {
    arity: usize,
    returns_value: bool,
    is_task: bool,
}

struct Checker<'p> {
    sigs: HashMap<&'p str, FnSig>,
    diags: Vec<Diagnostic>,
}

#[derive(Clone, Default)]
struct Flow {
    /// Spawn destinations that may still be awaiting their value.
    pending: BTreeSet<String>,
    /// Every path through the statement list has returned.
    terminated: bool,
}

struct FnCtx<'f> {
    func: &'f FunctionDecl,
    scopes: Vec<HashSet<String>>,
    loop_depth: usize,
}

impl FnCtx<'_> {
    fn declared(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }
}

fn contains_memory_access(kind: &StmtKind) -> bool {
    match kind {
        StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => value.memory_ops() > 0,
        StmtKind::MemStore { .. } => true,
        _ => false,
    }
}

impl<'p> Checker<'p> {
    fn err(&mut self, kind: K, msg: String, span: Span) {
        self.diags.push(Diagnostic::at(kind, msg, span));
    }

    fn check_expr(&mut self, ctx: &FnCtx, flow: &Flow, e: &Expr, span: Span) {
        for v in e.vars() {
            if !ctx.declared(&v) {
                self.err(K::UnresolvedName, format!("use of undeclared variable `{v}`"), span);
            } else if flow.pending.contains(&v) {
                self.err(K::PendingResultUse, format!("`{v}` is read before the `sync` that delivers its spawned value"), span);
            }
        }
    }

    fn check_assign_target(&mut self, ctx: &FnCtx, flow: &Flow, name: &str, span: Span) {
        if !ctx.declared(name) {
            self.err(K::UnresolvedName, format!("assignment to undeclared variable `{name}`"), span);
        } else if flow.pending.contains(name) {
            self.err(K::PendingResultUse, format!("`{name}` is reassigned before the `sync` that delivers its spawned value"), span);
        }
    }

    fn declare(&mut self, ctx: &mut FnCtx, name: &str, span: Span) {
        if ctx.declared(name) {
            self.err(K::Redeclaration, format!("`{name}` is already declared in this scope"), span);
        }
        ctx.scopes.last_mut().unwrap().insert(name.to_string());
    }

    fn check_spawn(&mut self, ctx: &FnCtx, flow: &Flow, callee: &str, args: &[Expr], span: Span, wants_value: bool) {
        for a in args {
            self.check_expr(ctx, flow, a, span);
        }
        match self.sigs.get(callee) {
            None => self.err(K::UnresolvedSpawnTarget, format!("unresolved spawn target `{callee}`"), span),
            Some(sig) => {
                let (arity, is_task, returns_value) = (sig.arity, sig.is_task, sig.returns_value);
                if !is_task {
                    self.err(K::SpawnOfNonTask, format!("`{callee}` is not declared as a `task`"), span);
                }
                if arity != args.len() {
                    self.err(
                        K::ArityMismatch,
                        format!("`{callee}` takes {arity} argument(s) but {} were supplied", args.len()),
                        span,
                    );
                }
                if wants_value && !returns_value {
                    self.err(K::VoidSpawnResult, format!("`{callee}` returns void; its spawn has no value to assign"), span);
                }
            }
        }
    }

    fn check_block(&mut self, ctx: &mut FnCtx, block: &[Stmt], mut flow: Flow) -> Flow {
        ctx.scopes.push(HashSet::new());
        let mut reported_unreachable = false;
        for s in block {
            if flow.terminated && !reported_unreachable {
                self.err(K::UnreachableCode, "statement is unreachable".to_string(), s.span);
                reported_unreachable = true;
            }
            flow = self.check_stmt(ctx, s, flow);
        }
        ctx.scopes.pop();
        flow
    }

    fn check_stmt(&mut self, ctx: &mut FnCtx, s: &Stmt, mut flow: Flow) -> Flow {
        let span = s.span;
        match &s.kind {
            StmtKind::Let { name, value } => {
                self.check_expr(ctx, &flow, value, span);
                self.declare(ctx, name, span);
            }
            StmtKind::Assign { name, value } => {
                self.check_expr(ctx, &flow, value, span);
                self.check_assign_target(ctx, &flow, name, span);
            }
            StmtKind::SpawnAssign { dest, declare, callee, args } => {
                self.check_spawn(ctx, &flow, callee, args, span, true);
                if *declare {
                    self.declare(ctx, dest, span);
                } else {
                    self.check_assign_target(ctx, &flow, dest, span);
                }
                if ctx.loop_depth > 0 {
                    self.err(
                        K::SpawnResultInLoop,
                        format!("value spawn into `{dest}` inside a loop would write the same placeholder repeatedly"),
                        span,
                    );
                }
                flow.pending.insert(dest.clone());
            }
            StmtKind::SpawnVoid { callee, args } => self.check_spawn(ctx, &flow, callee, args, span, false),
            StmtKind::Sync => {
                if ctx.loop_depth > 0 {
                    self.err(K::SyncInLoop, "`sync` inside a loop body is not supported".to_string(), span);
                }
                flow.pending.clear();
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.check_expr(ctx, &flow, cond, span);
                let t = self.check_block(ctx, then_block, Flow { terminated: false, ..flow.clone() });
                let e = self.check_block(ctx, else_block, Flow { terminated: false, ..flow.clone() });
                let mut pending = BTreeSet::new();
                for branch in [&t, &e] {
                    if !branch.terminated {
                        pending.extend(branch.pending.iter().cloned());
                    }
                }
                flow = Flow { pending, terminated: t.terminated && e.terminated };
            }
            StmtKind::While { cond, body } => {
                self.check_expr(ctx, &flow, cond, span);
                ctx.loop_depth += 1;
                let b = self.check_block(ctx, body, Flow { terminated: false, ..flow.clone() });
                ctx.loop_depth -= 1;
                flow.pending.extend(b.pending);
            }
            StmtKind::Return(value) => {
                match (value, ctx.func.returns_value()) {
                    (Some(e), true) => self.check_expr(ctx, &flow, e, span),
                    (Some(_), false) => self.err(
                        K::ReturnValueInVoid,
                        format!("void function `{}` cannot return a value", ctx.func.name),
                        span,
                    ),
                    (None, true) => self.err(
                        K::MissingReturnValue,
                        format!("function `{}` must return an i64 value", ctx.func.name),
                        span,
                    ),
                    (None, false) => {}
                }
                flow.terminated = true;
            }
            StmtKind::MemStore { addr, value } => {
                self.check_expr(ctx, &flow, addr, span);
                self.check_expr(ctx, &flow, value, span);
            }
            StmtKind::DaePragma(inner) => {
                match &inner.kind {
                    StmtKind::DaePragma(_) => self.err(K::NestedDaePragma, "DAE pragmas cannot be nested".to_string(), span),
                    StmtKind::Let { .. } | StmtKind::Assign { .. } | StmtKind::MemStore { .. } => {
                        if !contains_memory_access(&inner.kind) {
                            self.err(K::DaeRequiresMemoryAccess, "DAE pragma requires a memory access".to_string(), span);
                        }
                    }
                    _ => self.err(
                        K::DaeTarget,
                        "DAE pragma must precede an assignment or memory store".to_string(),
                        span,
                    ),
                }
                flow = self.check_stmt(ctx, inner, flow);
            }
        }
        flow
    }

    fn check_function(&mut self, f: &FunctionDecl) {
        let mut seen = HashSet::new();
        for p in &f.params {
            if !seen.insert(p.name.as_str()) {
                self.err(K::DuplicateParameter, format!("parameter `{}` is declared twice in `{}`", p.name, f.name), f.span);
            }
        }
        let mut ctx = FnCtx { func: f, scopes: vec![f.params.iter().map(|p| p.name.clone()).collect()], loop_depth: 0 };
        let flow = self.check_block(&mut ctx, &f.body, Flow::default());
        if f.returns_value() && !flow.terminated {
            self.err(K::MissingReturn, format!("function `{}` can reach its end without returning a value", f.name), f.span);
        }
    }
}

/// Reports every well-formedness violation in `program`; empty iff valid.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut checker = Checker { sigs: HashMap::new(), diags: Vec::new() };
    for f in &program.functions {
        let sig = FnSig { arity: f.params.len(), returns_value: f.returns_value(), is_task: f.is_task };
        if checker.sigs.insert(f.name.as_str(), sig).is_some() {
            checker.err(K::DuplicateFunction, format!("function `{}` is defined more than once", f.name), f.span);
        }
    }
    if program.function(&program.entry).is_none() {
        checker.diags.push(Diagnostic::new(
            K::UnknownEntry,
            format!("entry function `{}` is not declared", program.entry),
            None,
        ));
    }
    for f in &program.functions {
        checker.check_function(f);
    }
    checker.diags
}

/// Returns whether spawns may still be pending after `block`, inserting
/// syncs before every return reached with pending spawns.
fn sync_block(block: &mut Vec<Stmt>, mut pending: bool, loop_depth: usize, diags: &mut Vec<Diagnostic>) -> (bool, bool) {
    let mut out = Vec::with_capacity(block.len());
    let mut terminated = false;
    for mut s in block.drain(..) {
        match &mut s.kind {
            StmtKind::SpawnAssign { .. } | StmtKind::SpawnVoid { .. } => pending = true,
            StmtKind::Sync => pending = false,
            StmtKind::DaePragma(inner) => {
                if matches!(inner.kind, StmtKind::SpawnAssign { .. } | StmtKind::SpawnVoid { .. }) {
                    pending = true;
                }
            }
            StmtKind::If { then_block, else_block, .. } => {
                let (tp, tt) = sync_block(then_block, pending, loop_depth, diags);
                let (ep, et) = sync_block(else_block, pending, loop_depth, diags);
                pending = (!tt && tp) || (!et && ep);
                terminated = tt && et;
            }
            StmtKind::While { body, .. } => {
                let (bp, _) = sync_block(body, pending, loop_depth + 1, diags);
                pending |= bp;
            }
            StmtKind::Return(_) => {
                if pending {
                    if loop_depth > 0 {
                        diags.push(Diagnostic::at(
                            K::SyncInLoop,
                            "return inside a loop with outstanding spawns needs an implicit sync, which is not supported in a loop body",
                            s.span,
                        ));
                    }
                    out.push(Stmt::new(StmtKind::Sync, s.span));
                    pending = false;
                }
                terminated = true;
            }
            StmtKind::Let { .. } | StmtKind::Assign { .. } | StmtKind::MemStore { .. } => {}
        }
        out.push(s);
        if terminated {
            break;
        }
    }
    *block = out;
    (pending, terminated)
}

/// Makes implicit function exits explicit (see module docs). Expects a
/// program that passed [`validate`].
pub fn insert_implicit_syncs(program: &mut Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for f in &mut program.functions {
        let (pending, terminated) = sync_block(&mut f.body, false, 0, &mut diags);
        if !terminated {
            let end = f.body.last().map_or(f.span, |s| s.span);
            if pending {
                f.body.push(Stmt::new(StmtKind::Sync, end));
            }
            f.body.push(Stmt::new(StmtKind::Return(None), end));
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::super::{lexer::tokenize, parser::parse};
    use super::*;

    fn diags(src: &str) -> Vec<K> {
        validate(&parse(&tokenize(src).unwrap()).unwrap()).into_iter().map(|d| d.kind).collect()
    }

    const FIB: &str = "task i64 fib(i64 n) {
        if (n < 2) { return n; }
        let x = spawn fib(n - 1);
        let y = spawn fib(n - 2);
        sync;
        return x + y;
    }";

    #[test]
    fn fibonacci_is_well_formed() {
        assert_eq!(diags(FIB), vec![]);
    }

    #[test]
    fn unresolved_spawn_target() {
        let src = "task i64 f() { let x = spawn g(); sync; return x; }";
        let ds = validate(&parse(&tokenize(src).unwrap()).unwrap());
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].kind, K::UnresolvedSpawnTarget);
        assert!(ds[0].message.contains("`g`"));
    }

    #[test]
    fn dae_requires_memory_access() {
        assert_eq!(diags("void f() {\n#pragma bombyx dae\nlet a = 1;\n}"), vec![K::DaeRequiresMemoryAccess]);
        assert_eq!(diags("void f() {\n#pragma bombyx dae\nlet a = mem[1];\n}"), vec![]);
        assert_eq!(diags("void f() {\n#pragma bombyx dae\nmem[1] = 2;\n}"), vec![]);
        assert_eq!(diags("void f() {\n#pragma bombyx dae\nsync;\n}"), vec![K::DaeTarget]);
    }

    #[test]
    fn reports_all_violations() {
        let src = "task i64 f(i64 a, i64 a) { let b = c; spawn h(1); return; }";
        let ds = diags(src);
        assert!(ds.contains(&K::DuplicateParameter));
        assert!(ds.contains(&K::UnresolvedName));
        assert!(ds.contains(&K::UnresolvedSpawnTarget));
        assert!(ds.contains(&K::MissingReturnValue));
    }

    #[test]
    fn spawn_rules() {
        let base = "task void v() { return; } i64 plain() { return 1; } task i64 t(i64 a) { return a; }\n";
        assert_eq!(diags(&format!("{base} task i64 main() {{ let x = spawn v(); sync; return x; }}")), vec![K::VoidSpawnResult]);
        assert_eq!(diags(&format!("{base} task i64 main() {{ let x = spawn plain(); sync; return x; }}")), vec![K::SpawnOfNonTask]);
        assert_eq!(diags(&format!("{base} task i64 main() {{ let x = spawn t(); sync; return x; }}")), vec![K::ArityMismatch]);
        assert_eq!(
            diags(&format!("{base} task i64 main() {{ let x = spawn t(1); return x + 1; }}")),
            vec![K::PendingResultUse]
        );
        assert_eq!(
            diags(&format!("{base} task i64 main() {{ let x = spawn t(1); x = spawn t(2); sync; return x; }}")),
            vec![K::PendingResultUse]
        );
    }

    #[test]
    fn loop_restrictions() {
        let base = "task i64 t(i64 a) { return a; }\n";
        assert_eq!(
            diags(&format!("{base} task void main() {{ let i = 0; while (i < 3) {{ spawn t(i); sync; i = i + 1; }} }}")),
            vec![K::SyncInLoop]
        );
        assert_eq!(
            diags(&format!("{base} task void main() {{ let x = 0; while (x < 3) {{ x = spawn t(x); }} }}")),
            vec![K::SpawnResultInLoop]
        );
        assert_eq!(
            diags(&format!("{base} task void main() {{ let i = 0; while (i < 3) {{ spawn t(i); i = i + 1; }} sync; }}")),
            vec![]
        );
    }

    #[test]
    fn returns_on_every_path() {
        assert_eq!(diags("i64 f(i64 a) { if (a) { return 1; } }"), vec![K::MissingReturn]);
        assert_eq!(diags("i64 f(i64 a) { if (a) { return 1; } else { return 2; } }"), vec![]);
        assert_eq!(diags("void f() { return 1; }"), vec![K::ReturnValueInVoid]);
        assert_eq!(diags("i64 f() { return 1; mem[0] = 1; }"), vec![K::UnreachableCode]);
    }

    #[test]
    fn scoping() {
        assert_eq!(diags("i64 f() { let a = 1; let a = 2; return a; }"), vec![K::Redeclaration]);
        assert_eq!(diags("i64 f(i64 c) { if (c) { let t = 1; } return t; }"), vec![K::UnresolvedName]);
        assert_eq!(diags("i64 f(i64 c) { if (c) { let t = 1; } else { let t = 2; } return c; }"), vec![]);
    }

    #[test]
    fn entry_and_duplicates() {
        let p = parse(&tokenize("i64 f() { return 0; } i64 f() { return 1; }").unwrap()).unwrap();
        let ds = validate(&p.with_entry("nope"));
        let kinds: Vec<K> = ds.iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&K::DuplicateFunction));
        assert!(kinds.contains(&K::UnknownEntry));
    }

    #[test]
    fn implicit_sync_before_return() {
        let src = "task void w() { return; }
                   task void f(i64 c) { spawn w(); if (c) { return; } mem[0] = 1; }";
        let mut p = parse(&tokenize(src).unwrap()).unwrap();
        assert!(validate(&p).is_empty());
        assert!(insert_implicit_syncs(&mut p).is_empty());
        let body = &p.functions[1].body;
        let StmtKind::If { then_block, .. } = &body[1].kind else { panic!() };
        assert_eq!(then_block[0].kind, StmtKind::Sync);
        assert_eq!(then_block[1].kind, StmtKind::Return(None));
        assert_eq!(body[body.len() - 2].kind, StmtKind::Sync);
        assert_eq!(body[body.len() - 1].kind, StmtKind::Return(None));
        // `w` had nothing pending: only the explicit return.
        assert_eq!(p.functions[0].body.len(), 1);
    }

    #[test]
    fn no_sync_when_nothing_pending() {
        let mut p = parse(&tokenize(FIB).unwrap()).unwrap();
        let before = p.clone();
        insert_implicit_syncs(&mut p);
        assert_eq!(p, before);
    }
}
