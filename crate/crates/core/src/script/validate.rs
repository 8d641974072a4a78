use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{Expr, ExprKind, Program, Span, StmtKind};
use super::{builtin_arity, method_arity, SyntaxError};
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    fn at(span: Span, message: String) -> Self {
        Diagnostic {
            line: span.line,
            col: span.col,
            message,
        }
    }
}

impl From<&SyntaxError> for Diagnostic {
    fn from(e: &SyntaxError) -> Self {
        Diagnostic {
            line: e.line,
            col: e.col,
            message: format!("syntax error: {}", e.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub syntactically_valid: bool,
    /// Every call names a registered tool, builtin function or permitted
    /// method with a matching argument count, and every name is bound
    /// before use.
    pub calls_valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl Verdict {
    pub fn syntax_error(e: &SyntaxError) -> Self {
        Verdict {
            syntactically_valid: false,
            calls_valid: false,
            diagnostics: vec![e.into()],
        }
    }
}

fn count_msg(min: usize, max: usize) -> String {
    match (min, max) {
        (a, b) if a == b => format!("{a}"),
        (a, usize::MAX) => format!("at least {a}"),
        (a, b) => format!("{a} to {b}"),
    }
}

fn literal_type(e: &Expr) -> Option<&'static str> {
    Some(match e.kind {
        ExprKind::Int(_) => "int",
        ExprKind::Float(_) => "float",
        ExprKind::Str(_) => "str",
        ExprKind::Bool(_) => "bool",
        ExprKind::List(_) => "list",
        _ => return None,
    })
}

struct Checker<'a> {
    reg: &'a Registry,
    bound: BTreeSet<String>,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, span: Span, message: String) {
        self.diags.push(Diagnostic::at(span, message));
    }

    fn exprs(&mut self, items: &[Expr]) {
        items.iter().for_each(|e| self.expr(e));
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(name) => {
                if !self.bound.contains(name) {
                    let msg = if self.reg.contains(name) || builtin_arity(name).is_some() {
                        format!("{name} is a function; call it as {name}(...)")
                    } else {
                        format!("name '{name}' is not defined")
                    };
                    self.report(e.span, msg);
                }
            }
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) | ExprKind::Bool(_) => {}
            ExprKind::List(items) => self.exprs(items),
            ExprKind::Call { callee, args } => {
                match &callee.kind {
                    ExprKind::Ident(name) => self.call(name, callee.span, e.span, args),
                    _ => {
                        self.expr(callee);
                        self.report(e.span, "call target must be a tool or function name".into());
                    }
                }
                self.exprs(args);
            }
            ExprKind::Method { receiver, name, args } => {
                self.expr(receiver);
                match method_arity(name) {
                    Some(n) if n != args.len() => self.report(
                        e.span,
                        format!(".{name}() takes {n} arguments, got {}", args.len()),
                    ),
                    Some(_) => {}
                    None => self.report(e.span, format!("method .{name}() is not permitted")),
                }
                self.exprs(args);
            }
            ExprKind::Index { target, index } => {
                self.expr(target);
                self.expr(index);
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            ExprKind::Neg(inner) => self.expr(inner),
        }
    }

    fn call(&mut self, name: &str, name_span: Span, span: Span, args: &[Expr]) {
        let arity = if let Some(a) = builtin_arity(name) {
            Some(a)
        } else if let Some(spec) = self.reg.spec(name) {
            for (a, v) in spec.args.iter().flatten().zip(args) {
                let Some(lit) = literal_type(v) else { continue };
                let ok = match a.ty.name() {
                    "any" => true,
                    "image" => lit == "str",
                    "float" => lit == "float" || lit == "int",
                    ty => ty == lit,
                };
                if !ok {
                    let msg = format!("argument {} of {name} must be {}, got {lit}", a.name, a.ty.name());
                    self.report(v.span, msg);
                }
            }
            spec.arity()
        } else {
            self.report(name_span, format!("unknown tool {name}"));
            None
        };
        if let Some((min, max)) = arity {
            if args.len() < min || args.len() > max {
                let msg = format!("{name} takes {} arguments, got {}", count_msg(min, max), args.len());
                self.report(span, msg);
            }
        }
    }
}

/// Checks that every call resolves and every name is bound before use.
/// Identifiers in call position are function names, not variables.
pub fn validate_calls(program: &Program, reg: &Registry) -> Verdict {
    let mut c = Checker {
        reg,
        bound: BTreeSet::new(),
        diags: Vec::new(),
    };
    for stmt in &program.stmts {
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                c.expr(value);
                c.bound.insert(target.clone());
            }
            StmtKind::Expr(e) => c.expr(e),
        }
    }
    Verdict {
        syntactically_valid: true,
        calls_valid: c.diags.is_empty(),
        diagnostics: c.diags,
    }
}
