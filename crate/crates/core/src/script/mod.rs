//! The tool-script dialect: a small Python-shaped expression language
//! with assignments, calls, method calls, indexing and arithmetic, but no
//! control flow, definitions, imports or attribute access.

pub mod ast;
mod interp;
mod lexer;
mod parser;
mod printer;
mod record;
mod validate;

pub use ast::{BinOp, Expr, ExprKind, Program, Span, Stmt, StmtKind};
pub use interp::{execute, ExecError, Execution, ResourceUsage};
pub use lexer::RESERVED;
pub use parser::parse_program;
pub use printer::{print_expr, print_program};
pub use record::{execute_script, new_run_id, Attempt, Outcome, RunRecord};
pub use validate::{validate_calls, Diagnostic, Verdict};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::ToolError;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, col {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Llm,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub source: String,
    pub origin: Origin,
}

impl Script {
    pub fn new(source: impl Into<String>, origin: Origin) -> Self {
        Script {
            source: source.into(),
            origin,
        }
    }
}

pub fn parse_script(s: &Script) -> Result<Program, SyntaxError> {
    parse_program(&s.source)
}

const BUILTINS: [&str; 4] = ["print", "len", "round", "abs"];
const METHODS: [(&str, usize); 5] = [("sum", 0), ("mean", 0), ("count", 1), ("min", 0), ("max", 0)];

pub fn is_builtin_function(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// Words that cannot name a tool: dialect keywords and excluded Python words.
pub fn is_reserved(name: &str) -> bool {
    matches!(name, "True" | "False" | "in") || RESERVED.contains(&name)
}

/// Accepted argument counts `(min, max)` of a builtin function.
pub fn builtin_arity(name: &str) -> Option<(usize, usize)> {
    match name {
        "print" => Some((0, usize::MAX)),
        "len" | "abs" => Some((1, 1)),
        "round" => Some((1, 2)),
        _ => None,
    }
}

pub fn method_arity(name: &str) -> Option<usize> {
    METHODS.iter().find(|(m, _)| *m == name).map(|(_, n)| *n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_steps: u64,
    pub max_wall_ms: u64,
    pub max_value_bytes: usize,
    pub max_tool_calls: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 1_000_000,
            max_wall_ms: 60_000,
            max_value_bytes: 256 << 20,
            max_tool_calls: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Steps,
    WallClock,
    ValueStore,
    ToolCalls,
}

impl LimitKind {
    pub fn name(self) -> &'static str {
        match self {
            LimitKind::Steps => "steps",
            LimitKind::WallClock => "wall_clock",
            LimitKind::ValueStore => "value_store",
            LimitKind::ToolCalls => "tool_calls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("NameError: {0}")]
    NameError(String),
    #[error("TypeError: {0}")]
    TypeError(String),
    #[error("ValueError: {0}")]
    ValueError(String),
    #[error("ResourceLimit({}): {detail}", .which.name())]
    ResourceLimit { which: LimitKind, detail: String },
    #[error("ToolError ({}): {}", tool_name(.0), .0)]
    Tool(ToolError),
}

fn tool_name(e: &ToolError) -> &str {
    match e {
        ToolError::UnknownTool(n) => n,
        ToolError::ArgumentMismatch { tool, .. }
        | ToolError::ToolTimeout { tool, .. }
        | ToolError::ToolCrashed { tool, .. }
        | ToolError::MalformedToolOutput { tool, .. }
        | ToolError::Failed { tool, .. } => tool,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_texts() {
        let e = RuntimeError::Tool(ToolError::Failed {
            tool: "seg".into(),
            message: "CUDA out of memory".into(),
        });
        assert_eq!(e.to_string(), "ToolError (seg): CUDA out of memory");
        let e = RuntimeError::ResourceLimit {
            which: LimitKind::ValueStore,
            detail: "x".into(),
        };
        assert_eq!(e.to_string(), "ResourceLimit(value_store): x");
    }

    #[test]
    fn builtin_tables() {
        assert!(is_builtin_function("print"));
        assert!(!is_builtin_function("exec"));
        assert!(is_reserved("import") && is_reserved("True"));
        assert_eq!(method_arity("count"), Some(1));
        assert_eq!(method_arity("append"), None);
    }
}
