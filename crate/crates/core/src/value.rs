//! Runtime values shared by the interpreter, the tool registry and the
//! external tool wire protocol.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::eval::ObbDetection;
use crate::raster::{load_mask, load_raster, save_mask, save_raster, Mask, Raster, RasterError};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Raster(Arc<Raster>),
    Mask(Arc<Mask>),
    Detections(Arc<Vec<ObbDetection>>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "none",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Raster(_) => "raster",
            Value::Mask(_) => "mask",
            Value::Detections(_) => "detections",
        }
    }

    /// Approximate heap footprint, used for value-store accounting.
    pub fn approx_bytes(&self) -> usize {
        const SLOT: usize = 16;
        match self {
            Value::None | Value::Bool(_) | Value::Int(_) | Value::Float(_) => SLOT,
            Value::Str(s) => SLOT + s.len(),
            Value::List(items) => SLOT + items.iter().map(Value::approx_bytes).sum::<usize>(),
            Value::Raster(r) => SLOT + r.payload_bytes(),
            Value::Mask(m) => SLOT + m.payload_bytes(),
            Value::Detections(d) => SLOT + d.len() * std::mem::size_of::<ObbDetection>(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Bool(b) => Some(*b as i64 as f64),
            _ => None,
        }
    }

    /// Short description used in logs instead of full payloads.
    pub fn summary(&self) -> String {
        match self {
            Value::Str(s) if s.len() > 64 => format!("str[{}]", s.len()),
            Value::List(items) => format!("list[{}]", items.len()),
            Value::Raster(r) => format!(
                "raster {}x{} bands=[{}] {}",
                r.width(),
                r.height(),
                r.band_names().join(","),
                r.crs()
            ),
            Value::Mask(m) => format!(
                "mask {}x{} {}",
                m.width(),
                m.height(),
                if m.is_boolean() { "bool" } else { "class" }
            ),
            Value::Detections(d) => format!("detections[{}]", d.len()),
            other => other.to_string(),
        }
    }

    /// Content digest; rasters and masks hash their payloads.
    pub fn digest_into(&self, h: &mut Sha256) {
        h.update(self.type_name().as_bytes());
        match self {
            Value::None => {}
            Value::Bool(b) => h.update([*b as u8]),
            Value::Int(i) => h.update(i.to_le_bytes()),
            Value::Float(f) => h.update(f.to_le_bytes()),
            Value::Str(s) => {
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Value::List(items) => {
                h.update((items.len() as u64).to_le_bytes());
                items.iter().for_each(|v| v.digest_into(h));
            }
            Value::Raster(r) => {
                h.update((r.width() as u64).to_le_bytes());
                h.update((r.height() as u64).to_le_bytes());
                for name in r.band_names() {
                    h.update(name.as_bytes());
                }
                for band in r.bands() {
                    for v in band.values() {
                        h.update(v.to_le_bytes());
                    }
                }
            }
            Value::Mask(m) => {
                h.update((m.width() as u64).to_le_bytes());
                for i in 0..m.len() {
                    h.update(m.get(i).to_le_bytes());
                }
            }
            Value::Detections(d) => {
                for det in d.iter() {
                    for v in [det.cx, det.cy, det.w, det.h, det.angle] {
                        h.update(v.to_le_bytes());
                    }
                    h.update(det.class_id.to_le_bytes());
                }
            }
        }
    }

    /// Encodes to the wire form; rasters and masks are written as sidecar
    /// files under `workdir` and referenced by path.
    pub fn to_wire(&self, workdir: &Path) -> Result<Json, WireError> {
        self.to_wire_inner(workdir, &mut 0)
    }

    fn to_wire_inner(&self, workdir: &Path, counter: &mut usize) -> Result<Json, WireError> {
        Ok(match self {
            Value::None => json!({"type": "none"}),
            Value::Bool(b) => json!({"type": "bool", "value": b}),
            Value::Int(i) => json!({"type": "int", "value": i}),
            Value::Float(f) => {
                if !f.is_finite() {
                    return Err(WireError::Malformed(format!("non-finite float {f}")));
                }
                json!({"type": "float", "value": f})
            }
            Value::Str(s) => json!({"type": "str", "value": s}),
            Value::List(items) => {
                let items = items
                    .iter()
                    .map(|v| v.to_wire_inner(workdir, counter))
                    .collect::<Result<Vec<_>, _>>()?;
                json!({"type": "list", "items": items})
            }
            Value::Raster(r) => {
                *counter += 1;
                let path = save_raster(r, workdir.join(format!("arg{counter}.json")))?;
                json!({"type": "raster", "path": path.to_string_lossy()})
            }
            Value::Mask(m) => {
                *counter += 1;
                let path = save_mask(m, workdir.join(format!("arg{counter}.json")))?;
                json!({"type": "mask", "path": path.to_string_lossy()})
            }
            Value::Detections(d) => json!({"type": "detections", "items": d.as_ref()}),
        })
    }

    /// Decodes a wire value; relative raster paths resolve against `base`.
    pub fn from_wire(j: &Json, base: &Path) -> Result<Value, WireError> {
        let obj = j
            .as_object()
            .ok_or_else(|| WireError::Malformed(format!("expected object, got {j}")))?;
        let ty = obj
            .get("type")
            .and_then(Json::as_str)
            .ok_or_else(|| WireError::Malformed("missing \"type\"".into()))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| WireError::Malformed(format!("{ty} value lacks \"{name}\"")))
        };
        let bad = |what: &str| WireError::Malformed(format!("{ty} value has ill-typed {what}"));
        let path = |name: &str| -> Result<std::path::PathBuf, WireError> {
            let p = field(name)?.as_str().ok_or_else(|| bad(name))?;
            Ok(base.join(p))
        };
        Ok(match ty {
            "none" => Value::None,
            "bool" => Value::Bool(field("value")?.as_bool().ok_or_else(|| bad("value"))?),
            "int" => Value::Int(field("value")?.as_i64().ok_or_else(|| bad("value"))?),
            "float" => Value::Float(field("value")?.as_f64().ok_or_else(|| bad("value"))?),
            "str" => Value::Str(
                field("value")?
                    .as_str()
                    .ok_or_else(|| bad("value"))?
                    .to_string(),
            ),
            "list" => Value::List(
                field("items")?
                    .as_array()
                    .ok_or_else(|| bad("items"))?
                    .iter()
                    .map(|v| Value::from_wire(v, base))
                    .collect::<Result<_, _>>()?,
            ),
            "raster" => Value::Raster(Arc::new(load_raster(path("path")?)?)),
            "mask" => Value::Mask(Arc::new(load_mask(path("path")?)?)),
            "detections" => {
                let items: Vec<ObbDetection> = serde_json::from_value(field("items")?.clone())
                    .map_err(|e| WireError::Malformed(e.to_string()))?;
                Value::Detections(Arc::new(items))
            }
            other => return Err(WireError::Malformed(format!("unknown value type {other:?}"))),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("malformed value: {0}")]
    Malformed(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

fn fmt_float(f: f64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if f.is_nan() {
        out.write_str("nan")
    } else if f.is_infinite() {
        out.write_str(if f > 0.0 { "inf" } else { "-inf" })
    } else {
        write!(out, "{f:?}")
    }
}

impl fmt::Display for Value {
    /// Python-like rendering used by `print`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::None => f.write_str("None"),
            Value::Bool(true) => f.write_str("True"),
            Value::Bool(false) => f.write_str("False"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => fmt_float(*x, f),
            Value::Str(s) => f.write_str(s),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match item {
                        Value::Str(s) => write!(f, "'{}'", s.replace('\'', "\\'"))?,
                        other => write!(f, "{other}")?,
                    }
                }
                f.write_str("]")
            }
            Value::Raster(_) | Value::Mask(_) | Value::Detections(_) => {
                write!(f, "<{}>", self.summary())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_python_like() {
        assert_eq!(Value::Bool(true).to_string(), "True");
        assert_eq!(Value::Float(2.0).to_string(), "2.0");
        assert_eq!(Value::Float(0.1).to_string(), "0.1");
        assert_eq!(
            Value::List(vec![Value::Int(1), Value::Str("a".into())]).to_string(),
            "[1, 'a']"
        );
    }

    #[test]
    fn wire_rejects_unknown_type() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Value::from_wire(&json!({"type": "dict"}), dir.path()).is_err());
        assert!(Value::from_wire(&json!({"type": "int", "value": "x"}), dir.path()).is_err());
    }
}
