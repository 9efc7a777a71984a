//! MiniCilk pretty-printer. Output reparses to a structurally equal AST.

use std::fmt::Write;

use super::ast::*;

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, parent_prec: u8) {
    match e {
        Expr::Int(v) if *v < 0 => {
            if *v == i64::MIN {
                out.push_str("(-9223372036854775807 - 1)");
            } else {
                let _ = write!(out, "(-{})", v.unsigned_abs());
            }
        }
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let paren = prec < parent_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, a, prec);
            let _ = write!(out, " {} ", op.symbol());
            // Left-associative: a right operand of equal precedence needs parentheses.
            write_expr(out, b, prec + 1);
            if paren {
                out.push(')');
            }
        }
        Expr::Unary(op, a) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            write_expr(out, a, 7);
        }
        Expr::MemLoad(a) => {
            out.push_str("mem[");
            write_expr(out, a, 0);
            out.push(']');
        }
        Expr::MemXchg(a, b) => {
            out.push_str("mem_xchg(");
            write_expr(out, a, 0);
            out.push_str(", ");
            write_expr(out, b, 0);
            out.push(')');
        }
    }
}

fn args_to_string(args: &[Expr]) -> String {
    args.iter().map(expr_to_string).collect::<Vec<_>>().join(", ")
}

/// Single-line rendering of a straight-line statement (no trailing `;`).
pub fn simple_stmt_to_string(kind: &StmtKind) -> String {
    match kind {
        StmtKind::Let { name, value } => format!("let {name} = {}", expr_to_string(value)),
        StmtKind::Assign { name, value } => format!("{name} = {}", expr_to_string(value)),
        StmtKind::SpawnAssign { dest, declare, callee, args } => {
            format!("{}{dest} = spawn {callee}({})", if *declare { "let " } else { "" }, args_to_string(args))
        }
        StmtKind::SpawnVoid { callee, args } => format!("spawn {callee}({})", args_to_string(args)),
        StmtKind::Sync => "sync".to_string(),
        StmtKind::Return(None) => "return".to_string(),
        StmtKind::Return(Some(e)) => format!("return {}", expr_to_string(e)),
        StmtKind::MemStore { addr, value } => format!("mem[{}] = {}", expr_to_string(addr), expr_to_string(value)),
        StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::DaePragma(_) => {
            unreachable!("compound statement")
        }
    }
}

fn write_block(out: &mut String, block: &[Stmt], depth: usize) {
    for s in block {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match &s.kind {
        StmtKind::If { cond, then_block, else_block } => {
            let _ = writeln!(out, "{pad}if ({}) {{", expr_to_string(cond));
            write_block(out, then_block, depth + 1);
            if else_block.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, else_block, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "{pad}while ({}) {{", expr_to_string(cond));
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::DaePragma(inner) => {
            let _ = writeln!(out, "{pad}#pragma bombyx dae");
            write_stmt(out, inner, depth);
        }
        other => {
            let _ = writeln!(out, "{pad}{};", simple_stmt_to_string(other));
        }
    }
}

pub fn function_to_string(f: &FunctionDecl) -> String {
    let mut out = String::new();
    let params: Vec<String> = f.params.iter().map(|p| format!("i64 {}", p.name)).collect();
    let _ = writeln!(
        out,
        "{}{} {}({}) {{",
        if f.is_task { "task " } else { "" },
        match f.return_type {
            ReturnType::I64 => "i64",
            ReturnType::Void => "void",
        },
        f.name,
        params.join(", ")
    );
    write_block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

pub fn program_to_string(p: &Program) -> String {
    p.functions.iter().map(function_to_string).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::super::{lexer::tokenize, parser::parse};
    use super::*;

    #[test]
    fn parenthesizes_only_when_needed() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::var("a"), Expr::var("b")),
            Expr::binary(BinOp::Sub, Expr::var("c"), Expr::binary(BinOp::Sub, Expr::var("d"), Expr::Int(1))),
        );
        assert_eq!(expr_to_string(&e), "(a + b) * (c - (d - 1))");
    }

    #[test]
    fn reparses_to_same_ast() {
        let src = "task i64 f(i64 n) {\n#pragma bombyx dae\nlet a = mem[n] + mem_xchg(n, -1);\n\
                   if (!(a < 2)) { let x = spawn f(n - 1); spawn g(); sync; return x; } else { return a; } }\n\
                   task void g() { while (1 == 0) { mem[0] = 1; } return; }";
        let p = parse(&tokenize(src).unwrap()).unwrap();
        let printed = program_to_string(&p);
        let q = parse(&tokenize(&printed).unwrap()).unwrap();
        assert_eq!(p, q);
    }
}
