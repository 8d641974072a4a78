//! Query handling shared by the HTTP routes and the CLI.

use std::path::PathBuf;
use std::sync::Arc;

use geoscript_core::controller::Controller;
use geoscript_core::registry::{LocalCatalog, Registry, ToolCtx};
use geoscript_core::script::{Limits, Outcome, RunRecord, Verdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::store::{RunStore, UploadStore};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitOverrides {
    pub max_steps: Option<u64>,
    pub max_wall_ms: Option<u64>,
    pub max_value_bytes: Option<usize>,
    pub max_tool_calls: Option<usize>,
}

impl LimitOverrides {
    pub fn apply(&self, base: Limits) -> Limits {
        Limits {
            max_steps: self.max_steps.unwrap_or(base.max_steps),
            max_wall_ms: self.max_wall_ms.unwrap_or(base.max_wall_ms),
            max_value_bytes: self.max_value_bytes.unwrap_or(base.max_value_bytes),
            max_tool_calls: self.max_tool_calls.unwrap_or(base.max_tool_calls),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub query: String,
    /// Upload ids returned by `POST /uploads`.
    #[serde(default)]
    pub attachments: Vec<String>,
    #[serde(default)]
    pub limits: Option<LimitOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub run_id: String,
    /// Exactly the program that was validated and, if valid, executed.
    pub code: String,
    pub verdict: Verdict,
    pub output: Vec<String>,
    pub answer: Option<String>,
    pub artifacts: Vec<String>,
    pub outcome: Outcome,
}

impl QueryResponse {
    pub fn of(r: &RunRecord) -> Self {
        let artifacts = r
            .artifacts
            .iter()
            .filter_map(|a| std::path::Path::new(a).file_name())
            .map(|f| format!("/runs/{}/artifacts/{}", r.id, f.to_string_lossy()))
            .collect();
        QueryResponse {
            run_id: r.id.clone(),
            code: r.script.clone(),
            verdict: r.verdict.clone(),
            output: r.output.clone(),
            answer: r.answer().map(String::from),
            artifacts,
            outcome: r.outcome.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("unknown attachment {0}")]
    UnknownAttachment(String),
    #[error("cannot persist run: {0}")]
    Persist(#[from] std::io::Error),
}

/// Everything a query needs: registry, controller and storage.
pub struct App {
    pub config: ServiceConfig,
    pub registry: Arc<Registry>,
    pub controller: Controller,
    pub runs: RunStore,
    pub uploads: UploadStore,
    pub scenes: Option<Arc<LocalCatalog>>,
}

impl App {
    pub fn new(config: ServiceConfig) -> anyhow::Result<Self> {
        Ok(App {
            registry: Arc::new(config.registry()?),
            controller: config.controller()?,
            runs: RunStore::new(&config.runs_dir),
            uploads: UploadStore::new(&config.uploads_dir, config.upload_cap),
            scenes: config.scenes()?,
            config,
        })
    }

    /// Tool context for one run: its own uploads, artifact directory and
    /// the scene catalog, if any.
    pub fn tool_ctx(&self, run_id: &str, uploads: Vec<PathBuf>) -> ToolCtx {
        let mut ctx = ToolCtx::new()
            .with_uploads(uploads)
            .with_artifacts_dir(self.runs.artifacts_dir(run_id));
        if let Some(s) = &self.scenes {
            ctx = ctx.with_read_root(s.root()).with_scenes(s.clone());
        }
        ctx
    }

    /// Runs a query against uploaded attachments and persists the record.
    pub fn run_query(&self, req: &QueryRequest) -> Result<RunRecord, QueryError> {
        let uploads = req
            .attachments
            .iter()
            .map(|a| {
                self.uploads
                    .resolve(a)
                    .ok_or_else(|| QueryError::UnknownAttachment(a.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.run_with_files(req, uploads)
    }

    /// Like [`App::run_query`], with attachments given as local files.
    pub fn run_with_files(&self, req: &QueryRequest, files: Vec<PathBuf>) -> Result<RunRecord, QueryError> {
        if req.query.trim().is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        let run_id = geoscript_core::script::new_run_id();
        let controller = match &req.limits {
            Some(o) => Controller {
                limits: o.apply(self.controller.limits),
                ..self.controller.clone()
            },
            None => self.controller.clone(),
        };
        let ctx = self.tool_ctx(&run_id, files);
        let mut record = controller.handle_query(&self.registry, &req.query, ctx);
        record.id = run_id;
        self.runs.persist(&record)?;
        Ok(record)
    }
}
