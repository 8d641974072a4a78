//! Canonical source rendering. Parsing the output yields an equal AST.

use super::ast::{Expr, ExprKind, Program, StmtKind};

const POSTFIX: u8 = 4;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Call { .. } | ExprKind::Method { .. } | ExprKind::Index { .. } => POSTFIX,
        _ => ATOM,
    }
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn args(items: &[Expr], out: &mut String) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(a, 0, out);
    }
}

fn expr(e: &Expr, min: u8, out: &mut String) {
    if level(e) < min {
        out.push('(');
        expr(e, 0, out);
        out.push(')');
        return;
    }
    match &e.kind {
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Int(i) => out.push_str(&i.to_string()),
        ExprKind::Float(f) => out.push_str(&format!("{f:?}")),
        ExprKind::Str(s) => quote(s, out),
        ExprKind::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        ExprKind::List(items) => {
            out.push('[');
            args(items, out);
            out.push(']');
        }
        ExprKind::Call { callee, args: a } => {
            expr(callee, POSTFIX, out);
            out.push('(');
            args(a, out);
            out.push(')');
        }
        ExprKind::Method { receiver, name, args: a } => {
            expr(receiver, POSTFIX, out);
            out.push('.');
            out.push_str(name);
            out.push('(');
            args(a, out);
            out.push(')');
        }
        ExprKind::Index { target, index } => {
            expr(target, POSTFIX, out);
            out.push('[');
            expr(index, 0, out);
            out.push(']');
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            expr(lhs, p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            expr(rhs, p + 1, out);
        }
        ExprKind::Neg(inner) => {
            out.push('-');
            expr(inner, ATOM, out);
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(e, 0, &mut out);
    out
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.stmts {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                out.push_str(target);
                out.push_str(" = ");
                expr(value, 0, &mut out);
            }
            StmtKind::Expr(e) => expr(e, 0, &mut out),
        }
        out.push('\n');
    }
    out
}
