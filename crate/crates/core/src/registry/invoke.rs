use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::external::run_external;
use super::scenes::SceneProvider;
use super::{Handler, Registry};
use crate::raster::{load_raster, Raster};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToolError {
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("{tool}: {message}")]
    ArgumentMismatch { tool: String, message: String },
    #[error("{tool} timed out after {seconds:.1} s")]
    ToolTimeout { tool: String, seconds: f64 },
    #[error("{tool} crashed ({status}){}", fmt_stderr(.stderr))]
    ToolCrashed {
        tool: String,
        status: String,
        stderr: String,
    },
    #[error("{tool} returned malformed output: {message}")]
    MalformedToolOutput { tool: String, message: String },
    /// The tool ran and reported an error of its own; `message` is verbatim.
    #[error("{message}")]
    Failed { tool: String, message: String },
}

fn fmt_stderr(stderr: &str) -> String {
    let tail = stderr.trim();
    if tail.is_empty() {
        String::new()
    } else {
        format!(": {tail}")
    }
}

impl ToolError {
    pub(crate) fn failed(tool: &str, message: impl Into<String>) -> Self {
        ToolError::Failed {
            tool: tool.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(tool: &str, message: impl Into<String>) -> Self {
        ToolError::ArgumentMismatch {
            tool: tool.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub tool: String,
    pub args_digest: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub status: CallStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

pub(crate) fn args_digest(args: &[Value]) -> String {
    let mut h = Sha256::new();
    h.update((args.len() as u64).to_le_bytes());
    for a in args {
        a.digest_into(&mut h);
    }
    hex::encode(h.finalize())
}

/// Per-run state visible to tools: uploads, the scene provider, where
/// artifacts go, and the log of calls made so far.
#[derive(Default)]
pub struct ToolCtx {
    pub uploads: Vec<PathBuf>,
    pub scenes: Option<Arc<dyn SceneProvider>>,
    pub artifacts_dir: Option<PathBuf>,
    /// Directories `load_image` may read from, besides the uploads.
    pub read_roots: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub calls: Vec<ToolCallRecord>,
}

impl std::fmt::Debug for ToolCtx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToolCtx")
            .field("uploads", &self.uploads)
            .field("artifacts_dir", &self.artifacts_dir)
            .field("read_roots", &self.read_roots)
            .field("calls", &self.calls.len())
            .finish()
    }
}

impl ToolCtx {
    pub fn new() -> Self {
        ToolCtx::default()
    }

    /// Relative paths are made absolute: external tools run in their own directory.
    pub fn with_uploads(mut self, uploads: Vec<PathBuf>) -> Self {
        self.uploads = uploads
            .into_iter()
            .map(|p| std::path::absolute(&p).unwrap_or(p))
            .collect();
        self
    }

    pub fn with_scenes(mut self, scenes: Arc<dyn SceneProvider>) -> Self {
        self.scenes = Some(scenes);
        self
    }

    pub fn with_artifacts_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.artifacts_dir = Some(dir.into());
        self
    }

    pub fn with_read_root(mut self, dir: impl Into<PathBuf>) -> Self {
        self.read_roots.push(dir.into());
        self
    }

    /// Resolves `path` if it names an upload or lies under a read root.
    pub(crate) fn readable(&self, tool: &str, path: &str) -> Result<PathBuf, ToolError> {
        let denied = || ToolError::failed(tool, format!("access to {path} is not permitted"));
        let canon = Path::new(path)
            .canonicalize()
            .map_err(|_| ToolError::failed(tool, format!("no such file: {path}")))?;
        let same = |p: &PathBuf| p.canonicalize().is_ok_and(|c| c == canon);
        let under = |p: &PathBuf| p.canonicalize().is_ok_and(|c| canon.starts_with(c));
        if self.uploads.iter().any(same) || self.read_roots.iter().any(under) {
            Ok(canon)
        } else {
            Err(denied())
        }
    }

    pub(crate) fn load_image(&self, tool: &str, path: &str) -> Result<Raster, ToolError> {
        let p = self.readable(tool, path)?;
        load_raster(&p).map_err(|e| ToolError::failed(tool, e.to_string()))
    }
}

impl Registry {
    /// Invokes `name` with positional `args`, appending exactly one
    /// [`ToolCallRecord`] to `ctx.calls` whatever the result.
    pub fn invoke(&self, ctx: &mut ToolCtx, name: &str, args: &[Value]) -> Result<Value, ToolError> {
        let started_at = Utc::now();
        let result = self.dispatch(ctx, name, args);
        let finished_at = Utc::now().max(started_at);
        let (status, error, output) = match &result {
            Ok(v) => (CallStatus::Ok, None, Some(v.summary())),
            Err(e) => (CallStatus::Error, Some(e.to_string()), None),
        };
        ctx.calls.push(ToolCallRecord {
            tool: name.to_string(),
            args_digest: args_digest(args),
            started_at,
            finished_at,
            status,
            error,
            output,
        });
        result
    }

    fn dispatch(&self, ctx: &mut ToolCtx, name: &str, args: &[Value]) -> Result<Value, ToolError> {
        let tool = self
            .tool(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        check_args(&tool.spec, args)?;
        match &tool.handler {
            Handler::Builtin(f) => f(ctx, args),
            Handler::External { cmd, timeout } => run_external(cmd, *timeout, name, args),
        }
    }
}

fn check_args(spec: &super::ToolSpec, args: &[Value]) -> Result<(), ToolError> {
    let Some(schema) = &spec.args else {
        return Ok(());
    };
    let (min, max) = spec.arity().unwrap_or((0, usize::MAX));
    if args.len() < min || args.len() > max {
        let expected = if min == max {
            min.to_string()
        } else {
            format!("{min} to {max}")
        };
        return Err(ToolError::mismatch(
            &spec.name,
            format!("expected {expected} arguments, got {}", args.len()),
        ));
    }
    for (a, v) in schema.iter().zip(args) {
        if !a.ty.accepts(v) {
            return Err(ToolError::mismatch(
                &spec.name,
                format!("argument {} must be {}, got {}", a.name, a.ty.name(), v.type_name()),
            ));
        }
    }
    Ok(())
}
