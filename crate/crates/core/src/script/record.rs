use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::interp::{execute, ResourceUsage};
use super::validate::{validate_calls, Verdict};
use super::{parse_script, Limits, Origin, Script};
use crate::registry::{Registry, ToolCallRecord, ToolCtx};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    ValidationFailure,
    RuntimeError { message: String },
    /// The language model could not be reached; nothing was generated.
    BackendError { message: String },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Outcome::RuntimeError { message } | Outcome::BackendError { message } => Some(message),
            _ => None,
        }
    }
}

/// One generation: the raw completion, the code extracted from it and its verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub completion: String,
    pub script: String,
    pub fences_stripped: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub query: String,
    pub prompt_digest: String,
    /// Exactly the source that was parsed and, if valid, executed.
    pub script: String,
    pub origin: Origin,
    pub verdict: Verdict,
    pub attempts: Vec<Attempt>,
    pub tool_calls: Vec<ToolCallRecord>,
    pub output: Vec<String>,
    pub artifacts: Vec<String>,
    pub outcome: Outcome,
    pub usage: ResourceUsage,
    pub limits: Limits,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunRecord {
    /// The last printed line, taken as the run's answer.
    pub fn answer(&self) -> Option<&str> {
        self.output.last().map(String::as_str)
    }

    /// A copy with run id, timestamps and wall time cleared and artifact
    /// paths reduced to file names, for comparing runs.
    pub fn normalized(&self) -> RunRecord {
        let epoch = DateTime::<Utc>::UNIX_EPOCH;
        let mut r = self.clone();
        r.id = String::new();
        r.started_at = epoch;
        r.finished_at = epoch;
        r.usage.wall_ms = 0;
        for c in &mut r.tool_calls {
            c.started_at = epoch;
            c.finished_at = epoch;
        }
        for a in &mut r.artifacts {
            let Some(name) = std::path::Path::new(a.as_str()).file_name() else {
                continue;
            };
            let name = name.to_string_lossy().into_owned();
            // the same path may also appear in call outputs and printed lines
            for c in &mut r.tool_calls {
                if let Some(o) = &mut c.output {
                    *o = o.replace(a.as_str(), &name);
                }
            }
            for line in &mut r.output {
                *line = line.replace(a.as_str(), &name);
            }
            *a = name;
        }
        r
    }
}

pub fn new_run_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

/// Parses, validates and, when every call resolves, executes `script`.
/// Query, prompt digest and attempts are left for the caller to fill.
pub fn execute_script(script: &Script, reg: &Registry, ctx: &mut ToolCtx, limits: &Limits) -> RunRecord {
    let started_at = Utc::now();
    let (verdict, program) = match parse_script(script) {
        Ok(p) => (validate_calls(&p, reg), Some(p)),
        Err(e) => (Verdict::syntax_error(&e), None),
    };
    let (outcome, output, usage) = match program {
        Some(p) if verdict.calls_valid => {
            let run = execute(&p, reg, ctx, limits);
            let outcome = match run.result {
                Ok(()) => Outcome::Success,
                Err(e) => Outcome::RuntimeError { message: e.to_string() },
            };
            (outcome, run.output, run.usage)
        }
        _ => (Outcome::ValidationFailure, Vec::new(), ResourceUsage::default()),
    };
    RunRecord {
        id: new_run_id(),
        query: String::new(),
        prompt_digest: String::new(),
        script: script.source.clone(),
        origin: script.origin,
        verdict,
        attempts: Vec::new(),
        tool_calls: ctx.calls.clone(),
        output,
        artifacts: ctx.artifacts.iter().map(|p| p.display().to_string()).collect(),
        outcome,
        usage,
        limits: *limits,
        started_at,
        finished_at: Utc::now().max(started_at),
    }
}
