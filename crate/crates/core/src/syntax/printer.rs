use std::fmt::Write;

use super::ast::{Expr, ExprKind, Program, Stmt, StmtKind};

const INDENT: &str = "    ";

/// Renders a program in canonical surface syntax. Every annotation is
/// printed explicitly, with `*` for unknown.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for (name, ty) in &program.prelude {
        let _ = writeln!(out, "extern {name}: {ty}");
    }
    if !program.prelude.is_empty() && !program.stmts.is_empty() {
        out.push('\n');
    }
    print_block(&program.stmts, 0, &mut out);
    out
}

fn print_block(stmts: &[Stmt], level: usize, out: &mut String) {
    for (i, stmt) in stmts.iter().enumerate() {
        print_stmt(stmt, level, out);
        let is_def = matches!(stmt.kind, StmtKind::Def(_));
        if is_def && level == 0 && i + 1 < stmts.len() {
            out.push('\n');
        }
    }
}

fn print_stmt(stmt: &Stmt, level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
    match &stmt.kind {
        StmtKind::Expr(e) => out.push_str(&print_expr(e)),
        StmtKind::Return(e) => {
            out.push_str("return ");
            out.push_str(&print_expr(e));
        }
        StmtKind::Assign { target, annot, value, .. } => {
            let _ = write!(out, "{target}: {annot} = {}", print_expr(value));
        }
        StmtKind::IndexAssign { target, index, value } => {
            let _ = write!(
                out,
                "{}[{}] = {}",
                print_operand(target),
                print_expr(index),
                print_expr(value)
            );
        }
        StmtKind::Def(def) => {
            let params: Vec<String> =
                def.params.iter().map(|p| format!("{}: {}", p.name, p.annot)).collect();
            let _ = writeln!(out, "def {}({}) -> {}:", def.name, params.join(", "), def.ret);
            print_block(&def.body, level + 1, out);
            return;
        }
    }
    out.push('\n');
}

pub fn print_expr(expr: &Expr) -> String {
    match &expr.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Var(name) => name.clone(),
        ExprKind::Add(a, b) => format!("{} + {}", print_sum_operand(a, true), print_sum_operand(b, false)),
        ExprKind::Call(callee, args) => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("{}({})", print_operand(callee), args.join(", "))
        }
        ExprKind::If(c, t, e) => {
            format!("if {} then {} else {}", print_expr(c), print_expr(t), print_expr(e))
        }
        ExprKind::Array(elems) => {
            let elems: Vec<String> = elems.iter().map(print_expr).collect();
            format!("[{}]", elems.join(", "))
        }
        ExprKind::Index(target, index) => {
            format!("{}[{}]", print_operand(target), print_expr(index))
        }
    }
}

/// Operand of `+`. Sums associate to the left, so only a right operand that
/// is itself a sum needs parentheses.
fn print_sum_operand(expr: &Expr, left: bool) -> String {
    match &expr.kind {
        ExprKind::If(..) => format!("({})", print_expr(expr)),
        ExprKind::Add(..) if !left => format!("({})", print_expr(expr)),
        _ => print_expr(expr),
    }
}

/// Callee or indexed target: anything but an atom or postfix form is wrapped.
fn print_operand(expr: &Expr) -> String {
    match &expr.kind {
        ExprKind::If(..) | ExprKind::Add(..) => format!("({})", print_expr(expr)),
        _ => print_expr(expr),
    }
}
