use std::fmt::Write;

use super::*;
use crate::frontend::pretty::expr_to_string;

fn args(a: &[Expr]) -> String {
    a.iter().map(expr_to_string).collect::<Vec<_>>().join(", ")
}

fn layout_text(l: &ClosureLayout) -> String {
    let fields: Vec<String> = l
        .fields()
        .into_iter()
        .map(|f| match f.role {
            FieldRole::ReturnDest => "ret".to_string(),
            FieldRole::Ready => f.name,
            FieldRole::Placeholder => format!("?{}", f.name),
        })
        .collect();
    let join = match l.join {
        JoinPolicy::Static(n) => format!("static({n})"),
        JoinPolicy::Dynamic => "dynamic".to_string(),
    };
    format!("{} {{ {} }} join={join} bits={}/{}", l.continuation, fields.join(", "), l.payload_bits, l.padded_bits)
}

fn stmt_text(kind: &ExStmtKind) -> String {
    match kind {
        ExStmtKind::Let { name, value } => format!("let {name} = {}", expr_to_string(value)),
        ExStmtKind::Assign { name, value } => format!("{name} = {}", expr_to_string(value)),
        ExStmtKind::MemStore { addr, value } => format!("mem[{}] = {}", expr_to_string(addr), expr_to_string(value)),
        ExStmtKind::DeclareClosure { handle, layout } => format!("closure {handle}: {}", layout_text(layout)),
        ExStmtKind::SpawnTask { callee, args: a, dest } => {
            let d = match dest {
                SpawnDest::Field { handle, field } => format!("{handle}.@{field}"),
                SpawnDest::Counter { handle } => format!("{handle}.join"),
                SpawnDest::Parent => "parent".to_string(),
            };
            format!("spawn {callee}({}) -> {d}", args(a))
        }
    }
}

fn terminator_text(t: &ExTerminator) -> String {
    match t {
        ExTerminator::If { cond, then_block, else_block, .. } => {
            format!("if ({}) b{then_block} else b{else_block}", expr_to_string(cond))
        }
        ExTerminator::Goto(b) => format!("goto b{b}"),
        ExTerminator::While { cond, body, exit } => format!("while ({}) b{body} else b{exit}", expr_to_string(cond)),
        ExTerminator::Return(None) => "return".to_string(),
        ExTerminator::Return(Some(e)) => format!("return {}", expr_to_string(e)),
        ExTerminator::SpawnNext { handle } => format!("spawn_next {handle}"),
    }
}

pub fn dump_task(t: &ExplicitTaskFunction) -> String {
    let kind = match t.kind {
        TaskKind::Function => "task",
        TaskKind::Continuation => "continuation",
        TaskKind::Access => "access",
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{kind} {}({}) -> {}",
        t.name,
        t.params.join(", "),
        if t.returns_value { "i64" } else { "void" }
    );
    for b in &t.blocks {
        let _ = writeln!(out, "\nb{}:{}", b.id, if b.id == t.entry { " (entry)" } else { "" });
        for s in &b.stmts {
            let _ = writeln!(out, "  {}", stmt_text(&s.kind));
        }
        let _ = writeln!(out, "  T: {}", terminator_text(&b.terminator));
    }
    out
}

pub fn dump_system(s: &ExplicitSystem) -> String {
    s.tasks.iter().map(dump_task).collect::<Vec<_>>().join("\n")
}
