//! Service settings, read from `GEOSCRIPT_*` environment variables.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use geoscript_core::controller::{Controller, LlmBackend, RemoteBackend, ScriptedBackend};
use geoscript_core::registry::{LocalCatalog, MockConfig, Registry};
use geoscript_core::script::Limits;

pub const ENV_BIND: &str = "GEOSCRIPT_BIND";
pub const ENV_PORT: &str = "GEOSCRIPT_PORT";
pub const ENV_REGISTRY_DIR: &str = "GEOSCRIPT_REGISTRY_DIR";
pub const ENV_RUNS_DIR: &str = "GEOSCRIPT_RUNS_DIR";
pub const ENV_UPLOADS_DIR: &str = "GEOSCRIPT_UPLOADS_DIR";
pub const ENV_CATALOG: &str = "GEOSCRIPT_CATALOG";
pub const ENV_BACKEND: &str = "GEOSCRIPT_BACKEND";
pub const ENV_FIXTURES: &str = "GEOSCRIPT_FIXTURES";
pub const ENV_RETRIES: &str = "GEOSCRIPT_RETRIES";
pub const ENV_UPLOAD_CAP_MIB: &str = "GEOSCRIPT_UPLOAD_CAP_MIB";
pub const ENV_GPU_MEMORY_MIB: &str = "GEOSCRIPT_GPU_MEMORY_MIB";

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_UPLOAD_CAP: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum BackendKind {
    /// Canned completions from a fixtures file.
    Scripted(PathBuf),
    /// Chat-completions endpoint configured by `GEOSCRIPT_LLM_*`.
    Remote,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub registry_dir: Option<PathBuf>,
    pub runs_dir: PathBuf,
    pub uploads_dir: PathBuf,
    pub catalog: Option<PathBuf>,
    pub backend: BackendKind,
    pub retries: usize,
    pub upload_cap: usize,
    pub mock: MockConfig,
    pub limits: Limits,
}

fn var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

fn parsed<T: std::str::FromStr>(name: &str) -> anyhow::Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match var(name) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("{name}={v}: {e}")),
    }
}

impl ServiceConfig {
    /// Defaults for a local setup rooted at `dir`, scripted backend.
    pub fn local(dir: impl Into<PathBuf>, fixtures: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            registry_dir: None,
            runs_dir: dir.join("runs"),
            uploads_dir: dir.join("uploads"),
            catalog: None,
            backend: BackendKind::Scripted(fixtures.into()),
            retries: 1,
            upload_cap: DEFAULT_UPLOAD_CAP,
            mock: MockConfig::default(),
            limits: Limits::default(),
        }
    }

    pub fn from_env() -> anyhow::Result<Self> {
        let backend = match var(ENV_BACKEND).as_deref().unwrap_or("scripted") {
            "scripted" => BackendKind::Scripted(
                var(ENV_FIXTURES)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("fixtures/completions.json")),
            ),
            "remote" => BackendKind::Remote,
            other => bail!("{ENV_BACKEND} must be scripted or remote, got {other}"),
        };
        let mut mock = MockConfig::default();
        if let Some(mib) = parsed::<f64>(ENV_GPU_MEMORY_MIB)? {
            mock.gpu_memory_mib = (mib > 0.0).then_some(mib);
        }
        Ok(ServiceConfig {
            bind: var(ENV_BIND).unwrap_or_else(|| "127.0.0.1".into()),
            port: parsed(ENV_PORT)?.unwrap_or(DEFAULT_PORT),
            registry_dir: var(ENV_REGISTRY_DIR).map(PathBuf::from),
            runs_dir: var(ENV_RUNS_DIR).map(PathBuf::from).unwrap_or_else(|| "runs".into()),
            uploads_dir: var(ENV_UPLOADS_DIR).map(PathBuf::from).unwrap_or_else(|| "uploads".into()),
            catalog: var(ENV_CATALOG).map(PathBuf::from),
            backend,
            retries: parsed(ENV_RETRIES)?.unwrap_or(1),
            upload_cap: parsed::<usize>(ENV_UPLOAD_CAP_MIB)?.map_or(DEFAULT_UPLOAD_CAP, |m| m << 20),
            mock,
            limits: Limits::default(),
        })
    }

    /// Builtins, manifests from `registry_dir`, then the in-process mock
    /// model tools for any model tool no manifest provides.
    pub fn registry(&self) -> anyhow::Result<Registry> {
        let reg = match &self.registry_dir {
            Some(dir) => Registry::load(dir).with_context(|| format!("loading manifests from {}", dir.display()))?,
            None => Registry::builtin(),
        };
        Ok(reg.with_mock_model_tools(self.mock))
    }

    pub fn controller(&self) -> anyhow::Result<Controller> {
        let backend = match &self.backend {
            BackendKind::Scripted(path) => LlmBackend::Scripted(ScriptedBackend::load(path)?),
            BackendKind::Remote => LlmBackend::Remote(RemoteBackend::from_env()?),
        };
        Ok(Controller {
            backend,
            retries: self.retries,
            limits: self.limits,
        })
    }

    pub fn scenes(&self) -> anyhow::Result<Option<Arc<LocalCatalog>>> {
        self.catalog
            .as_ref()
            .map(|p| LocalCatalog::open(p).map(Arc::new).map_err(anyhow::Error::from))
            .transpose()
    }
}
