use std::fmt::Write;

use super::*;
use crate::frontend::pretty::expr_to_string;

fn args(a: &[Expr]) -> String {
    a.iter().map(expr_to_string).collect::<Vec<_>>().join(", ")
}

pub(crate) fn stmt_text(kind: &IrStmtKind) -> String {
    match kind {
        IrStmtKind::Let { name, value } => format!("let {name} = {}", expr_to_string(value)),
        IrStmtKind::Assign { name, value } => format!("{name} = {}", expr_to_string(value)),
        IrStmtKind::SpawnAssign { dest, callee, args: a } => format!("{dest} = spawn {callee}({})", args(a)),
        IrStmtKind::SpawnVoid { callee, args: a } => format!("spawn {callee}({})", args(a)),
        IrStmtKind::MemStore { addr, value } => format!("mem[{}] = {}", expr_to_string(addr), expr_to_string(value)),
    }
}

fn terminator_text(t: &Terminator) -> String {
    match t {
        Terminator::If { cond, then_block, else_block, .. } => {
            format!("if ({}) b{then_block} else b{else_block}", expr_to_string(cond))
        }
        Terminator::Goto(b) => format!("goto b{b}"),
        Terminator::While { cond, body, exit } => format!("while ({}) b{body} else b{exit}", expr_to_string(cond)),
        Terminator::Return(None) => "return".to_string(),
        Terminator::Return(Some(e)) => format!("return {}", expr_to_string(e)),
        Terminator::Sync(b) => format!("sync -> b{b}"),
    }
}

pub fn dump_function(f: &ImplicitFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "function {}({}) -> {}",
        f.name,
        f.params.join(", "),
        if f.returns_value { "i64" } else { "void" }
    );
    for b in &f.blocks {
        let _ = writeln!(out, "\nb{}:{}", b.id, if b.id == f.entry { " (entry)" } else { "" });
        for s in &b.stmts {
            let _ = writeln!(out, "  {}{}", if s.dae { "[dae] " } else { "" }, stmt_text(&s.kind));
        }
        let _ = writeln!(out, "  T: {}", terminator_text(&b.terminator));
    }
    out
}

pub fn dump_program(p: &ImplicitProgram) -> String {
    p.functions.iter().map(dump_function).collect::<Vec<_>>().join("\n")
}
