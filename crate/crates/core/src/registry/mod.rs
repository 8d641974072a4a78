//! Tool registry: structured tool descriptions, manifest discovery and
//! dispatch to in-process or subprocess tools.
//!
//! Every tool carries the same description sections (general, technical,
//! and for model tools: supported sensors, a usage example and training
//! datasets with their taxonomy). The rendered catalog is what the
//! controller shows the language model.

mod builtins;
mod catalog;
mod external;
mod invoke;
pub mod mock;
mod scenes;

pub use catalog::render_prompt_catalog;
pub use external::{decode_response, encode_request, ToolRequest, ToolResponse};
pub use invoke::{CallStatus, ToolCallRecord, ToolCtx, ToolError};
pub use mock::{mock_model_tools, MockConfig};
pub use scenes::{CatalogError, LocalCatalog, SceneEntry, SceneProvider};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolCategory {
    /// Access to imagery, local or remote, and its preprocessing.
    Data,
    /// Extraction of information from imagery.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSupport {
    pub sensor: String,
    /// Sensor channel → canonical band name.
    pub band_mapping: BTreeMap<String, String>,
    pub normalization: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDataset {
    pub name: String,
    pub taxonomy: BTreeMap<u32, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    /// A raster, or a path string the tool loads.
    Image,
    Raster,
    Mask,
    Int,
    Float,
    Str,
    Bool,
    List,
    Detections,
    Any,
}

impl ArgType {
    pub fn accepts(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ArgType::Any, _)
                | (ArgType::Image, Value::Raster(_) | Value::Str(_))
                | (ArgType::Raster, Value::Raster(_))
                | (ArgType::Mask, Value::Mask(_))
                | (ArgType::Int, Value::Int(_))
                | (ArgType::Float, Value::Int(_) | Value::Float(_))
                | (ArgType::Str, Value::Str(_))
                | (ArgType::Bool, Value::Bool(_))
                | (ArgType::List, Value::List(_))
                | (ArgType::Detections, Value::Detections(_))
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ArgType::Image => "image",
            ArgType::Raster => "raster",
            ArgType::Mask => "mask",
            ArgType::Int => "int",
            ArgType::Float => "float",
            ArgType::Str => "str",
            ArgType::Bool => "bool",
            ArgType::List => "list",
            ArgType::Detections => "detections",
            ArgType::Any => "any",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ArgType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
}

impl ArgSpec {
    pub fn required(name: &str, ty: ArgType) -> Self {
        ArgSpec {
            name: name.into(),
            ty,
            optional: false,
        }
    }

    pub fn optional(name: &str, ty: ArgType) -> Self {
        ArgSpec {
            name: name.into(),
            ty,
            optional: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Binding {
    Builtin,
    External {
        cmd: Vec<String>,
        timeout_s: f64,
        /// Opaque scheduling hint (e.g. "gpu"); recorded, not interpreted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resources: Option<String>,
    },
}

/// A tool's description and binding, as read from a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub name: String,
    pub category: ToolCategory,
    pub general_description: String,
    pub technical_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported_sensors: Option<Vec<SensorSupport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_example: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_datasets: Option<Vec<TrainingDataset>>,
    /// Machine-checkable signature; arity is enforced when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args: Option<Vec<ArgSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<String>,
    pub binding: Binding,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl ToolSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !valid_name(&self.name) {
            return Err(format!("tool name {:?} must match [a-z][a-z0-9_]*", self.name));
        }
        if crate::script::is_builtin_function(&self.name) || crate::script::is_reserved(&self.name) {
            return Err(format!("tool name {:?} collides with a language builtin", self.name));
        }
        let model_sections = [
            self.supported_sensors.is_some(),
            self.usage_example.is_some(),
            self.training_datasets.is_some(),
        ];
        match self.category {
            ToolCategory::Model if !model_sections.iter().all(|s| *s) => {
                return Err("model tools need supported_sensors, usage_example and training_datasets".into())
            }
            ToolCategory::Data if model_sections.iter().any(|s| *s) => {
                return Err("data tools must not carry model sections".into())
            }
            _ => {}
        }
        if let Some(args) = &self.args {
            let mut seen_optional = false;
            for a in args {
                if seen_optional && !a.optional {
                    return Err(format!("required argument {} follows an optional one", a.name));
                }
                seen_optional |= a.optional;
            }
        }
        if let Binding::External { cmd, timeout_s, .. } = &self.binding {
            if cmd.is_empty() {
                return Err("external binding needs a command".into());
            }
            if !(timeout_s.is_finite() && *timeout_s > 0.0) {
                return Err("timeout_s must be positive".into());
            }
        }
        Ok(())
    }

    /// `(min, max)` argument count when a signature is declared.
    pub fn arity(&self) -> Option<(usize, usize)> {
        self.args.as_ref().map(|args| {
            let min = args.iter().filter(|a| !a.optional).count();
            (min, args.len())
        })
    }

    pub fn signature(&self) -> Option<String> {
        let args = self.args.as_ref()?;
        let params: Vec<String> = args
            .iter()
            .map(|a| {
                if a.optional {
                    format!("{}: {} = optional", a.name, a.ty.name())
                } else {
                    format!("{}: {}", a.name, a.ty.name())
                }
            })
            .collect();
        Some(format!(
            "{}({}) -> {}",
            self.name,
            params.join(", "),
            self.returns.as_deref().unwrap_or("any")
        ))
    }
}

pub(crate) type BuiltinFn = dyn Fn(&mut ToolCtx, &[Value]) -> Result<Value, ToolError> + Send + Sync;

#[derive(Clone)]
pub(crate) enum Handler {
    Builtin(Arc<BuiltinFn>),
    External {
        cmd: Vec<String>,
        timeout: Duration,
    },
}

#[derive(Clone)]
pub(crate) struct RegisteredTool {
    pub spec: ToolSpec,
    pub handler: Handler,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot parse manifest {file}: {message}")]
    ManifestParseError { file: PathBuf, message: String },
    #[error("duplicate tool name {0}")]
    DuplicateToolName(String),
    #[error("invalid tool {name}: {message}")]
    InvalidSpec { name: String, message: String },
    #[error("cannot read registry directory: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable-after-load set of tools keyed by name.
#[derive(Clone)]
pub struct Registry {
    tools: BTreeMap<String, RegisteredTool>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("tools", &self.tools.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Registry {
    /// Registry holding only the builtin data, index and geo tools.
    pub fn builtin() -> Self {
        let mut reg = Registry {
            tools: BTreeMap::new(),
        };
        for (spec, f) in builtins::builtin_tools() {
            reg.insert(spec, Handler::Builtin(f))
                .expect("builtin tools are valid and unique");
        }
        reg
    }

    /// Builtins plus every `*.json` manifest in `dir`, in file-name order.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let dir = dir.as_ref();
        let mut reg = Registry::builtin();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json") && p.is_file())
            .collect();
        files.sort();
        for file in files {
            let text = std::fs::read_to_string(&file)?;
            let spec: ToolSpec =
                serde_json::from_str(&text).map_err(|e| RegistryError::ManifestParseError {
                    file: file.clone(),
                    message: e.to_string(),
                })?;
            reg.register_manifest(spec, dir)?;
        }
        Ok(reg)
    }

    fn register_manifest(&mut self, mut spec: ToolSpec, base: &Path) -> Result<(), RegistryError> {
        let handler = match &mut spec.binding {
            Binding::Builtin => {
                return Err(RegistryError::InvalidSpec {
                    name: spec.name.clone(),
                    message: "manifests must use an external binding".into(),
                })
            }
            Binding::External { cmd, timeout_s, .. } => {
                let mut resolved = cmd.clone();
                if let Some(program) = resolved.first_mut() {
                    let p = Path::new(program.as_str());
                    if p.is_relative() && program.contains('/') {
                        *program = base.join(p).to_string_lossy().into_owned();
                    }
                }
                Handler::External {
                    cmd: resolved,
                    timeout: Duration::from_secs_f64(timeout_s.max(0.001)),
                }
            }
        };
        self.insert(spec, handler)
    }

    pub(crate) fn insert(&mut self, spec: ToolSpec, handler: Handler) -> Result<(), RegistryError> {
        spec.validate().map_err(|message| RegistryError::InvalidSpec {
            name: spec.name.clone(),
            message,
        })?;
        if self.tools.contains_key(&spec.name) {
            return Err(RegistryError::DuplicateToolName(spec.name));
        }
        self.tools
            .insert(spec.name.clone(), RegisteredTool { spec, handler });
        Ok(())
    }

    /// Adds an external tool described by `spec` (binding must be external).
    pub fn register_external(&mut self, spec: ToolSpec) -> Result<(), RegistryError> {
        self.register_manifest(spec, Path::new("."))
    }

    /// Adds the deterministic in-process stand-ins for the model tools,
    /// skipping names that are already registered (e.g. from manifests).
    pub fn with_mock_model_tools(mut self, config: MockConfig) -> Self {
        for (spec, f) in mock::mock_handlers(config) {
            if !self.tools.contains_key(&spec.name) {
                self.insert(spec, Handler::Builtin(f))
                    .expect("mock tools are valid");
            }
        }
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name).map(|t| &t.spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values().map(|t| &t.spec)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub(crate) fn tool(&self, name: &str) -> Option<&RegisteredTool> {
        self.tools.get(name)
    }
}
