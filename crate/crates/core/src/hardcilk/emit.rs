use std::collections::BTreeSet;
use std::fmt::Write;

use super::{c_ident, compute_closure_struct, task_struct, ClosureStruct};
use crate::cps::{
    ClosureLayout, ExStmtKind, ExTerminator, ExplicitSystem, ExplicitTaskFunction, FieldRole, JoinPolicy, SpawnDest,
    SystemRelations, TaskRelations,
};
use crate::frontend::{Expr, UnOp};
use crate::implicit_ir::BlockId;

/// Generated source of one processing element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedPe {
    pub task: String,
    pub source_text: String,
    pub closure_struct: ClosureStruct,
}

const HEADER: &str = "\
// Interface contract assumed of the scheduler:
//   arg_in            one argument struct (or closure) per task instance.
//                     Void tasks receive it wrapped with `done_dest`, the
//                     destination their completion is reported to.
//   spawn_<t>         enqueues a new instance of task <t>.
//   spawn_next_<c>    write-buffer record issuing continuation closure <c>.
//   send_arg_<c>      write-buffer record delivering a result to a closure
//                     of continuation <c>; host_out delivers to the host.
//   alloc_req/resp    allocates a closure with an initial join count.
//   join_inc          adds one expected child to the given destination.
// Write-buffer records start with {kind, dest_task, payload_bytes}.
// Destinations pack the task index in bits 63..56, the closure address in
// bits 55..8 and the field index in bits 7..0 (0xFF: counter only).
";

const HELPERS: &str = "\
static inline uint64_t cilk_dest(uint8_t task, uint64_t closure, uint64_t field) {
    return ((uint64_t)task << 56) | ((closure & 0xFFFFFFFFFFFFull) << 8) | (field & 0xFF);
}

static inline uint8_t cilk_dest_task(uint64_t dest) {
    return (uint8_t)(dest >> 56);
}

static inline uint64_t cilk_counter_only(uint64_t dest) {
    return dest | FIELD_COUNTER_ONLY;
}
";

const XCHG_HELPER: &str = "
static inline int64_t cilk_xchg(int64_t *mem, int64_t addr, int64_t value) {
    int64_t old = mem[addr];
    mem[addr] = value;
    return old;
}
";

fn task_const(name: &str) -> String {
    format!("TASK_{}", name.to_uppercase())
}

fn expr_c(e: &Expr) -> String {
    fn go(e: &Expr, out: &mut String) {
        match e {
            Expr::Int(v) if *v == i64::MIN => out.push_str("INT64_MIN"),
            Expr::Int(v) if i32::try_from(*v).is_ok() => {
                let _ = write!(out, "{v}");
            }
            Expr::Int(v) => {
                let _ = write!(out, "{v}LL");
            }
            Expr::Var(v) => out.push_str(&c_ident(v)),
            Expr::Binary(op, a, b) => {
                let wrap = |child: &Expr, right: bool| match child {
                    Expr::Binary(c, ..) => c.precedence() < op.precedence() || (right && c.precedence() == op.precedence()),
                    _ => false,
                };
                let operand = |child: &Expr, right: bool, out: &mut String| {
                    if wrap(child, right) {
                        out.push('(');
                        go(child, out);
                        out.push(')');
                    } else {
                        go(child, out);
                    }
                };
                operand(a, false, out);
                let _ = write!(out, " {} ", op.symbol());
                operand(b, true, out);
            }
            Expr::Unary(op, a) => {
                out.push(if *op == UnOp::Neg { '-' } else { '!' });
                if matches!(**a, Expr::Binary(..) | Expr::Unary(..)) {
                    out.push('(');
                    go(a, out);
                    out.push(')');
                } else {
                    go(a, out);
                }
            }
            Expr::MemLoad(a) => {
                out.push_str("mem[");
                go(a, out);
                out.push(']');
            }
            Expr::MemXchg(a, v) => {
                out.push_str("cilk_xchg(mem, ");
                go(a, out);
                out.push_str(", ");
                go(v, out);
                out.push(')');
            }
        }
    }
    let mut s = String::new();
    go(e, &mut s);
    s
}

fn uses_memory(task: &ExplicitTaskFunction) -> (bool, bool) {
    let mut any = false;
    let mut xchg = false;
    fn scan(e: &Expr, any: &mut bool, xchg: &mut bool) {
        match e {
            Expr::MemLoad(a) => {
                *any = true;
                scan(a, any, xchg);
            }
            Expr::MemXchg(a, v) => {
                *any = true;
                *xchg = true;
                scan(a, any, xchg);
                scan(v, any, xchg);
            }
            Expr::Binary(_, a, b) => {
                scan(a, any, xchg);
                scan(b, any, xchg);
            }
            Expr::Unary(_, a) => scan(a, any, xchg),
            Expr::Int(_) | Expr::Var(_) => {}
        }
    }
    for b in &task.blocks {
        for s in &b.stmts {
            if matches!(s.kind, ExStmtKind::MemStore { .. }) {
                any = true;
            }
            for e in s.kind.operands() {
                scan(e, &mut any, &mut xchg);
            }
        }
        match &b.terminator {
            ExTerminator::If { cond, .. } | ExTerminator::While { cond, .. } => scan(cond, &mut any, &mut xchg),
            ExTerminator::Return(Some(e)) => scan(e, &mut any, &mut xchg),
            _ => {}
        }
    }
    (any, xchg)
}

/// Input type of a task's argument stream.
fn input_type(system: &ExplicitSystem, task: &ExplicitTaskFunction) -> String {
    if task.returns_value {
        task_struct(system, task).type_name
    } else {
        format!("{}_task", task.name)
    }
}

fn write_struct(out: &mut String, s: &ClosureStruct) {
    let _ = writeln!(out, "struct {} {{", s.type_name);
    for f in &s.fields {
        if f.is_padding {
            let _ = writeln!(out, "    uint8_t _pad[{}];", f.size_bytes);
        } else if f.name == "ret_dest" && f.offset_bytes == 0 {
            let _ = writeln!(out, "    uint64_t ret_dest;");
        } else {
            let _ = writeln!(out, "    int64_t {};", f.name);
        }
    }
    let _ = writeln!(out, "}};");
    let _ = writeln!(
        out,
        "static_assert(sizeof({}) == {}, \"{} must be {} bits\");\n",
        s.type_name,
        s.size_bytes(),
        s.type_name,
        s.padded_bits
    );
}

fn write_task_types(out: &mut String, system: &ExplicitSystem, task: &ExplicitTaskFunction) {
    let s = task_struct(system, task);
    write_struct(out, &s);
    if !task.returns_value {
        let _ = writeln!(out, "struct {}_task {{\n    {} body;\n    uint64_t done_dest;\n}};\n", task.name, s.type_name);
    }
}

struct Emitter<'a> {
    system: &'a ExplicitSystem,
    task: &'a ExplicitTaskFunction,
    rel: &'a TaskRelations,
    out: String,
    indent: usize,
}

impl Emitter<'_> {
    fn line(&mut self, text: impl AsRef<str>) {
        let text = text.as_ref();
        if text.is_empty() {
            self.out.push('\n');
        } else {
            let _ = writeln!(self.out, "{}{}", "    ".repeat(self.indent), text);
        }
    }

    fn layout(&self, handle: &str) -> &ClosureLayout {
        self.task.closure_layout(handle).expect("handle declared in task")
    }

    fn send(&mut self, value: Option<&Expr>) {
        let targets: Vec<String> = self.rel.send_arguments_to.iter().cloned().collect();
        self.line("{");
        self.indent += 1;
        self.line("wb_send_argument cilk_rec;");
        self.line("cilk_rec.kind = WB_SEND_ARGUMENT;");
        self.line("cilk_rec.dest_task = cilk_dest_task(cilk_ret);");
        self.line(format!("cilk_rec.payload_bytes = {};", if value.is_some() { 8 } else { 0 }));
        self.line("cilk_rec.dest = cilk_ret;");
        self.line(format!("cilk_rec.value = {};", value.map(expr_c).unwrap_or_else(|| "0".to_string())));
        if targets.is_empty() && !self.rel.may_reach_host {
            self.line("(void)cilk_rec;");
        } else {
            self.line("switch (cilk_rec.dest_task) {");
            let n = targets.len();
            for (i, t) in targets.iter().enumerate() {
                let last = i + 1 == n && !self.rel.may_reach_host;
                self.line(if last { "default:".to_string() } else { format!("case {}:", task_const(t)) });
                self.indent += 1;
                self.line(format!("send_arg_{t}.write(cilk_rec);"));
                self.line("break;");
                self.indent -= 1;
            }
            if self.rel.may_reach_host {
                self.line("default:");
                self.indent += 1;
                self.line("host_out.write(cilk_rec);");
                self.line("break;");
                self.indent -= 1;
            }
            self.line("}");
        }
        self.indent -= 1;
        self.line("}");
        self.line("return;");
    }

    fn spawn(&mut self, callee: &str, args: &[Expr], dest: &SpawnDest) {
        let callee_task = self.system.task(callee).expect("spawned task exists");
        let callee_struct = task_struct(self.system, callee_task);
        let dest_expr = match dest {
            SpawnDest::Field { handle, field } => {
                let cs = compute_closure_struct(self.layout(handle));
                let idx = cs.field_index(field).expect("placeholder field");
                self.line(format!("cilk_{handle}_claimed |= 1u << {idx};"));
                self.dynamic_increment(handle);
                format!("cilk_dest({}, cilk_{handle}, {idx})", task_const(&self.layout(handle).continuation))
            }
            SpawnDest::Counter { handle } => {
                self.dynamic_increment(handle);
                format!("cilk_dest({}, cilk_{handle}, FIELD_COUNTER_ONLY)", task_const(&self.layout(handle).continuation))
            }
            SpawnDest::Parent => {
                self.line("join_inc.write(cilk_counter_only(cilk_ret));");
                "cilk_counter_only(cilk_ret)".to_string()
            }
        };
        self.line("{");
        self.indent += 1;
        let (ty, prefix) = if callee_task.returns_value {
            (callee_struct.type_name.clone(), "cilk_spawn.")
        } else {
            (format!("{callee}_task"), "cilk_spawn.body.")
        };
        self.line(format!("{ty} cilk_spawn;"));
        if callee_task.returns_value {
            self.line(format!("cilk_spawn.ret_dest = {dest_expr};"));
        } else {
            self.line(format!("cilk_spawn.done_dest = {dest_expr};"));
        }
        for (p, a) in callee_task.params.iter().zip(args) {
            self.line(format!("{prefix}{} = {};", c_ident(p), expr_c(a)));
        }
        self.line(format!("spawn_{callee}.write(cilk_spawn);"));
        self.indent -= 1;
        self.line("}");
    }

    fn dynamic_increment(&mut self, handle: &str) {
        if self.layout(handle).join == JoinPolicy::Dynamic {
            let c = task_const(&self.layout(handle).continuation);
            self.line(format!("join_inc.write(cilk_dest({c}, cilk_{handle}, FIELD_COUNTER_ONLY));"));
        }
    }

    fn declare(&mut self, handle: &str, layout: &ClosureLayout) {
        let (count, note) = match layout.join {
            JoinPolicy::Static(k) => (k + 1, format!("{k} children + 1 released by spawn_next")),
            JoinPolicy::Dynamic => (1, "grows per spawn; 1 released by spawn_next".to_string()),
        };
        self.line(format!("// closure {handle} for {}", layout.continuation));
        self.line("{");
        self.indent += 1;
        self.line("closure_request cilk_req;");
        self.line(format!("cilk_req.task = {};", task_const(&layout.continuation)));
        self.line(format!("cilk_req.join_count = {count}; // {note}"));
        self.line("alloc_req.write(cilk_req);");
        self.line(format!("cilk_{handle} = alloc_resp.read();"));
        self.line(format!("cilk_{handle}_claimed = 0;"));
        self.indent -= 1;
        self.line("}");
    }

    fn spawn_next(&mut self, handle: &str) {
        let layout = self.layout(handle).clone();
        let cs = compute_closure_struct(&layout);
        let c = &layout.continuation;
        let mut fixed = 0u64;
        let mut placeholders = 0u64;
        for (i, f) in layout.fields().iter().enumerate() {
            match f.role {
                FieldRole::Placeholder => placeholders |= 1 << i,
                _ => fixed |= 1 << i,
            }
        }
        self.line("{");
        self.indent += 1;
        self.line(format!("wb_spawn_next_{c} cilk_next;"));
        self.line("cilk_next.kind = WB_SPAWN_NEXT;");
        self.line(format!("cilk_next.dest_task = {};", task_const(c)));
        self.line(format!("cilk_next.payload_bytes = {};", cs.size_bytes()));
        self.line(format!("cilk_next.field_mask = {fixed:#x}u | ({placeholders:#x}u & ~cilk_{handle}_claimed);"));
        self.line(format!("cilk_next.dest = cilk_dest({}, cilk_{handle}, FIELD_COUNTER_ONLY);", task_const(c)));
        if layout.has_return_dest {
            self.line("cilk_next.payload.ret_dest = cilk_ret;");
        } else {
            self.line("cilk_next.done_dest = cilk_ret;");
        }
        for v in layout.params() {
            let f = c_ident(&v);
            self.line(format!("cilk_next.payload.{f} = {f};"));
        }
        self.line(format!("spawn_next_{c}.write(cilk_next);"));
        self.indent -= 1;
        self.line("}");
        self.line("return;");
    }

    fn stmts(&mut self, block: BlockId) {
        let b = self.task.block(block);
        for s in &b.stmts {
            match &s.kind {
                ExStmtKind::Let { name, value } | ExStmtKind::Assign { name, value } => {
                    self.line(format!("{} = {};", c_ident(name), expr_c(value)))
                }
                ExStmtKind::MemStore { addr, value } => self.line(format!("mem[{}] = {};", expr_c(addr), expr_c(value))),
                ExStmtKind::DeclareClosure { handle, layout } => self.declare(handle, layout),
                ExStmtKind::SpawnTask { callee, args, dest } => self.spawn(callee, args, dest),
            }
        }
    }

    /// Emits the region starting at `start` up to (not including) `stop`.
    fn region(&mut self, start: BlockId, stop: Option<BlockId>) {
        let mut cur = start;
        loop {
            if Some(cur) == stop {
                return;
            }
            let term = self.task.block(cur).terminator.clone();
            if let ExTerminator::While { cond, body, exit } = &term {
                if self.task.block(cur).stmts.is_empty() {
                    self.line(format!("while ({}) {{", expr_c(cond)));
                    self.indent += 1;
                } else {
                    self.line("for (;;) {");
                    self.indent += 1;
                    self.stmts(cur);
                    self.line(format!("if (!({})) break;", expr_c(cond)));
                }
                self.region(*body, Some(cur));
                self.indent -= 1;
                self.line("}");
                cur = *exit;
                continue;
            }
            self.stmts(cur);
            match &term {
                ExTerminator::Goto(next) => cur = *next,
                ExTerminator::If { cond, then_block, else_block, merge } => {
                    let join = merge.or(stop);
                    self.line(format!("if ({}) {{", expr_c(cond)));
                    self.indent += 1;
                    self.region(*then_block, join);
                    self.indent -= 1;
                    if Some(*else_block) == join {
                        self.line("}");
                    } else {
                        self.line("} else {");
                        self.indent += 1;
                        self.region(*else_block, join);
                        self.indent -= 1;
                        self.line("}");
                    }
                    match merge {
                        Some(m) => cur = *m,
                        None => return,
                    }
                }
                ExTerminator::Return(e) => return self.send(e.as_ref()),
                ExTerminator::SpawnNext { handle } => return self.spawn_next(handle),
                ExTerminator::While { .. } => unreachable!(),
            }
        }
    }
}

/// Generates the processing element for task `name`.
pub fn emit_pe_cpp(system: &ExplicitSystem, relations: &SystemRelations, name: &str) -> EmittedPe {
    let task = system.task(name).expect("task exists");
    let rel = relations.get(name);
    let own = task_struct(system, task);
    let (uses_mem, uses_xchg) = uses_memory(task);
    let closures = task.declared_closures();
    let needs_join_inc = closures.iter().any(|(_, l)| l.join == JoinPolicy::Dynamic)
        || task.blocks.iter().flat_map(|b| &b.stmts).any(|s| {
            matches!(&s.kind, ExStmtKind::SpawnTask { dest: SpawnDest::Parent, .. })
        });

    let mut out = String::new();
    let _ = writeln!(out, "// Processing element for task `{name}`.\n//");
    out.push_str(HEADER);
    out.push_str("#include <hls_stream.h>\n#include <stdint.h>\n\n");
    for (i, t) in system.tasks.iter().enumerate() {
        let _ = writeln!(out, "static const uint8_t {} = {i};", task_const(&t.name));
    }
    out.push_str("static const uint8_t TASK_HOST = 255;\n");
    out.push_str("static const uint8_t WB_SPAWN_NEXT = 0;\nstatic const uint8_t WB_SEND_ARGUMENT = 1;\n");
    out.push_str("static const uint64_t FIELD_COUNTER_ONLY = 0xFF;\n\n");
    out.push_str(HELPERS);
    if uses_xchg {
        out.push_str(XCHG_HELPER);
    }
    out.push('\n');

    let mut typed: BTreeSet<String> = BTreeSet::new();
    write_task_types(&mut out, system, task);
    typed.insert(task.name.clone());
    for callee in &rel.spawns {
        if typed.insert(callee.clone()) {
            write_task_types(&mut out, system, system.task(callee).expect("callee exists"));
        }
    }
    for c in &rel.spawn_nexts {
        let layout = &system.closure_layouts()[c];
        let cs = compute_closure_struct(layout);
        if typed.insert(c.clone()) {
            write_struct(&mut out, &cs);
        }
        let _ = writeln!(out, "struct wb_spawn_next_{c} {{");
        out.push_str("    uint8_t kind;\n    uint8_t dest_task;\n    uint16_t payload_bytes;\n    uint32_t field_mask;\n    uint64_t dest;\n");
        if !layout.has_return_dest {
            out.push_str("    uint64_t done_dest;\n");
        }
        let _ = writeln!(out, "    {} payload;\n}};\n", cs.type_name);
    }
    out.push_str("struct wb_send_argument {\n    uint8_t kind;\n    uint8_t dest_task;\n    uint16_t payload_bytes;\n    uint64_t dest;\n    int64_t value;\n};\n\n");
    if !closures.is_empty() {
        out.push_str("struct closure_request {\n    uint8_t task;\n    uint32_t join_count;\n};\n\n");
    }

    // Ports, in a fixed order.
    let mut ports: Vec<(String, String)> = vec![(format!("hls::stream<{}>", input_type(system, task)), "arg_in".into())];
    for callee in &rel.spawns {
        let t = system.task(callee).expect("callee exists");
        ports.push((format!("hls::stream<{}>", input_type(system, t)), format!("spawn_{callee}")));
    }
    for c in &rel.spawn_nexts {
        ports.push((format!("hls::stream<wb_spawn_next_{c}>"), format!("spawn_next_{c}")));
    }
    // Tasks that always end in spawn_next never send.
    let sends = task.blocks.iter().any(|b| matches!(b.terminator, ExTerminator::Return(_)));
    for c in rel.send_arguments_to.iter().filter(|_| sends) {
        ports.push(("hls::stream<wb_send_argument>".into(), format!("send_arg_{c}")));
    }
    if sends && rel.may_reach_host {
        ports.push(("hls::stream<wb_send_argument>".into(), "host_out".into()));
    }
    if !closures.is_empty() {
        ports.push(("hls::stream<closure_request>".into(), "alloc_req".into()));
        ports.push(("hls::stream<uint64_t>".into(), "alloc_resp".into()));
    }
    if needs_join_inc {
        ports.push(("hls::stream<uint64_t>".into(), "join_inc".into()));
    }
    let mut params: Vec<String> = ports.iter().map(|(ty, n)| format!("{ty} &{n}")).collect();
    if uses_mem {
        params.push("int64_t *mem".into());
    }
    let _ = writeln!(out, "void pe_{name}(\n    {}) {{", params.join(",\n    "));
    for (_, n) in &ports {
        let _ = writeln!(out, "#pragma HLS INTERFACE mode=axis port={n}");
    }
    if uses_mem {
        out.push_str("#pragma HLS INTERFACE mode=m_axi port=mem offset=slave bundle=gmem\n");
    }

    let mut em = Emitter { system, task, rel, out, indent: 1 };
    em.line(format!("{} cilk_in = arg_in.read();", input_type(system, task)));
    let access = if task.returns_value { "cilk_in." } else { "cilk_in.body." };
    if task.returns_value {
        em.line("uint64_t cilk_ret = cilk_in.ret_dest;");
    } else {
        em.line("uint64_t cilk_ret = cilk_in.done_dest;");
    }
    let mut declared: BTreeSet<String> = BTreeSet::new();
    for p in &task.params {
        let f = c_ident(p);
        em.line(format!("int64_t {f} = {access}{f};"));
        declared.insert(p.clone());
    }
    for b in &task.blocks {
        for s in &b.stmts {
            if let ExStmtKind::Let { name, .. } | ExStmtKind::Assign { name, .. } = &s.kind {
                if declared.insert(name.clone()) {
                    em.line(format!("int64_t {} = 0;", c_ident(name)));
                }
            }
        }
    }
    for (h, l) in &closures {
        em.line(format!("uint64_t cilk_{h} = 0;"));
        em.line(format!("uint32_t cilk_{h}_claimed = 0;"));
        for v in l.placeholders.iter() {
            if declared.insert(v.clone()) {
                em.line(format!("int64_t {} = 0;", c_ident(v)));
            }
        }
    }
    em.line("");
    em.region(task.entry, None);
    em.out.push_str("}\n");
    EmittedPe { task: name.to_string(), source_text: em.out, closure_struct: own }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{compile, CompileOptions, VISIT_SOURCE};

    const FIB: &str = "task i64 fib(i64 n) { if (n < 2) { return n; } let x = spawn fib(n - 1); let y = spawn fib(n - 2); sync; return x + y; }";

    fn pes(src: &str) -> Vec<EmittedPe> {
        let c = compile(src, &CompileOptions::default()).unwrap();
        c.explicit.tasks.iter().map(|t| emit_pe_cpp(&c.explicit, &c.relations, &t.name)).collect()
    }

    #[test]
    fn fibonacci_pe_shape() {
        let pes = pes(FIB);
        let fib = &pes[0].source_text;
        assert_eq!(fib.matches("spawn_fib.write(").count(), 2);
        assert_eq!(fib.matches("spawn_next_fib__cont0.write(").count(), 1);
        assert_eq!(fib.matches("cilk_rec.kind = WB_SEND_ARGUMENT;").count(), 1);
        assert!(fib.contains("static_assert(sizeof(fib__cont0_closure) == 32"));
        assert_eq!(pes[1].closure_struct.padded_bits, 256);
        assert!(pes[1].source_text.contains("return;"));
    }

    #[test]
    fn single_task_has_no_spawn_ports() {
        let pes = pes("task i64 f(i64 a) { return a * 2; }");
        let text = &pes[0].source_text;
        assert!(!text.contains("&spawn_"));
        assert!(text.contains("host_out.write(cilk_rec);"));
        assert_eq!(text.matches("WB_SEND_ARGUMENT;").count(), 1);
    }

    #[test]
    fn visit_splits_into_three_pes() {
        let pes = pes(VISIT_SOURCE);
        let names: Vec<&str> = pes.iter().map(|p| p.task.as_str()).collect();
        assert_eq!(names, vec!["visit", "visit__cont0", "visit__access0"]);
        assert!(pes[0].source_text.contains("spawn_visit__access0.write("));
        assert!(pes[1].source_text.contains("spawn_visit.write("));
        assert!(pes[1].source_text.contains("join_inc.write("));
        assert!(pes[2].source_text.contains("send_arg_visit__cont0.write(cilk_rec);"));
        assert!(pes[1].source_text.contains("while (i < end) {"));
    }

    #[test]
    fn expressions_keep_precedence() {
        let e = Expr::binary(
            crate::frontend::BinOp::Mul,
            Expr::binary(crate::frontend::BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::binary(crate::frontend::BinOp::Sub, Expr::var("b"), Expr::Int(5_000_000_000)),
        );
        assert_eq!(expr_c(&e), "(a + 1) * (b - 5000000000LL)");
    }
}
