//! Prompt assembly, code generation through a chat-completion backend, and
//! the generate, validate, execute loop behind every query.

mod backend;

pub use backend::{query_digest, BackendError, ChatMessage, LlmBackend, RemoteBackend, ScriptedBackend};

use std::path::PathBuf;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::registry::{render_prompt_catalog, Registry, ToolCtx};
use crate::script::{
    execute, parse_program, validate_calls, Attempt, Limits, Outcome, ResourceUsage, RunRecord, Verdict,
};

/// Standing instructions sent with every query. The first two rules are
/// the output contract the validator enforces.
pub const SYSTEM_TEXT: &str = "You write programs for an Earth-observation analysis runtime.
Rules:
1. Reply with code only. Do not add commentary, markdown formatting or explanations.
2. The program must print its final result with print(...). The last printed line is the answer.
3. Use only the tools listed below and the builtins print, len, round, abs.
4. The language supports assignments, calls, method calls (.sum(), .mean(), .count(v), .min(), .max()), indexing, arithmetic, comparisons and `in`. It has no imports, loops, conditionals or function definitions.
5. `mask == k` gives a boolean mask, `k in mask` tests whether any pixel has class k, and `.sum()` on a boolean mask counts its true pixels.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("query is empty")]
    EmptyQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub catalog_text: String,
    pub user_query: String,
    /// File names of uploaded images, in upload order.
    pub attachments: Vec<String>,
}

impl PromptBundle {
    pub fn system_message(&self) -> String {
        format!("{}\n\n{}", self.system_text, self.catalog_text)
    }

    pub fn user_message(&self) -> String {
        if self.attachments.is_empty() {
            return self.user_query.clone();
        }
        let list: Vec<String> = self
            .attachments
            .iter()
            .enumerate()
            .map(|(i, a)| format!("- {a} (get_uploaded_image_path({i}))"))
            .collect();
        format!(
            "{}\n\nUploaded images, retrievable with get_uploaded_image_path():\n{}",
            self.user_query,
            list.join("\n")
        )
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::new("system", self.system_message()),
            ChatMessage::new("user", self.user_message()),
        ]
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for m in self.messages() {
            h.update(m.role.as_bytes());
            h.update([0]);
            h.update(m.content.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

pub fn build_prompt(reg: &Registry, query: &str, attachments: &[PathBuf]) -> Result<PromptBundle, ControllerError> {
    if query.trim().is_empty() {
        return Err(ControllerError::EmptyQuery);
    }
    Ok(PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        catalog_text: render_prompt_catalog(reg),
        user_query: query.trim().to_string(),
        attachments: attachments
            .iter()
            .map(|p| {
                p.file_name()
                    .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
            })
            .collect(),
    })
}

/// Removes markdown fence lines. Whatever else the completion contains is
/// kept, so prose around a fenced block still fails to parse.
pub fn strip_fences(completion: &str) -> (String, bool) {
    let mut stripped = false;
    let kept: Vec<&str> = completion
        .lines()
        .filter(|l| {
            let fence = l.trim_start().starts_with("```");
            stripped |= fence;
            !fence
        })
        .collect();
    let mut code = kept.join("\n").trim().to_string();
    if !code.is_empty() {
        code.push('\n');
    }
    (code, stripped)
}

fn feedback(verdict: &Verdict) -> String {
    let lines: Vec<String> = verdict
        .diagnostics
        .iter()
        .map(|d| format!("line {}, col {}: {}", d.line, d.col, d.message))
        .collect();
    format!(
        "The program was rejected:\n{}\nReply with the corrected program only.",
        lines.join("\n")
    )
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub backend: LlmBackend,
    /// Regenerations allowed after a rejected program.
    pub retries: usize,
    pub limits: Limits,
}

impl Controller {
    pub fn new(backend: LlmBackend) -> Self {
        Controller {
            backend,
            retries: 1,
            limits: Limits::default(),
        }
    }

    /// Runs one query end to end. Every failure ends up in the record's outcome.
    pub fn handle_query(&self, reg: &Registry, query: &str, mut ctx: ToolCtx) -> RunRecord {
        let started_at = Utc::now();
        let mut record = RunRecord {
            id: crate::script::new_run_id(),
            query: query.to_string(),
            prompt_digest: String::new(),
            script: String::new(),
            origin: self.backend.origin(),
            verdict: Verdict {
                syntactically_valid: false,
                calls_valid: false,
                diagnostics: Vec::new(),
            },
            attempts: Vec::new(),
            tool_calls: Vec::new(),
            output: Vec::new(),
            artifacts: Vec::new(),
            outcome: Outcome::ValidationFailure,
            usage: ResourceUsage::default(),
            limits: self.limits,
            started_at,
            finished_at: started_at,
        };
        let bundle = match build_prompt(reg, query, &ctx.uploads) {
            Ok(b) => b,
            Err(e) => {
                record.verdict.diagnostics.push(crate::script::Diagnostic {
                    line: 0,
                    col: 0,
                    message: e.to_string(),
                });
                record.finished_at = Utc::now().max(started_at);
                return record;
            }
        };
        record.prompt_digest = bundle.digest();
        let mut messages = bundle.messages();
        let mut program = None;
        for attempt in 0..=self.retries {
            let completion = match self.backend.complete(&bundle.user_query, attempt, &messages) {
                Ok(c) => c,
                Err(e) => {
                    record.outcome = Outcome::BackendError { message: e.to_string() };
                    record.finished_at = Utc::now().max(started_at);
                    return record;
                }
            };
            let (code, fences_stripped) = strip_fences(&completion);
            let (verdict, parsed) = if code.is_empty() {
                let e = crate::script::SyntaxError {
                    line: 1,
                    col: 1,
                    message: BackendError::EmptyCompletion.to_string(),
                };
                (Verdict::syntax_error(&e), None)
            } else {
                match parse_program(&code) {
                    Ok(p) => (validate_calls(&p, reg), Some(p)),
                    Err(e) => (Verdict::syntax_error(&e), None),
                }
            };
            record.attempts.push(Attempt {
                completion: completion.clone(),
                script: code.clone(),
                fences_stripped,
                verdict: verdict.clone(),
            });
            record.script = code;
            record.verdict = verdict.clone();
            if verdict.calls_valid {
                program = parsed;
                break;
            }
            messages.push(ChatMessage::new("assistant", completion));
            messages.push(ChatMessage::new("user", feedback(&verdict)));
        }
        if let Some(p) = program {
            let run = execute(&p, reg, &mut ctx, &self.limits);
            record.outcome = match run.result {
                Ok(()) => Outcome::Success,
                Err(e) => Outcome::RuntimeError { message: e.to_string() },
            };
            record.output = run.output;
            record.usage = run.usage;
        }
        record.tool_calls = ctx.calls;
        record.artifacts = ctx.artifacts.iter().map(|p| p.display().to_string()).collect();
        record.finished_at = Utc::now().max(started_at);
        record
    }
}

/// [`Controller::handle_query`] with an explicit retry budget.
pub fn handle_query(
    reg: &Registry,
    backend: &LlmBackend,
    query: &str,
    ctx: ToolCtx,
    limits: &Limits,
    retries: usize,
) -> RunRecord {
    let c = Controller {
        backend: backend.clone(),
        retries,
        limits: *limits,
    };
    c.handle_query(reg, query, ctx)
}

/// Code generation alone: one completion, fences stripped.
pub fn generate_code(backend: &LlmBackend, bundle: &PromptBundle) -> Result<crate::script::Script, BackendError> {
    let completion = backend.complete(&bundle.user_query, 0, &bundle.messages())?;
    let (code, _) = strip_fences(&completion);
    if code.is_empty() {
        return Err(BackendError::EmptyCompletion);
    }
    Ok(crate::script::Script::new(code, backend.origin()))
}
