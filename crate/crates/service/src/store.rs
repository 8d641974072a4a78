//! Run log and upload storage on the filesystem.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use geoscript_core::script::RunRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Run ids and upload ids are UUIDs; anything else never names a file.
fn is_uuid(s: &str) -> bool {
    uuid::Uuid::parse_str(s).is_ok_and(|u| u.hyphenated().to_string() == s)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let dest = dir.join(name);
    tmp.persist(&dest).map_err(|e| e.error)?;
    Ok(dest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub query: String,
    pub status: String,
    pub answer: Option<String>,
    pub started_at: DateTime<Utc>,
}

impl RunSummary {
    pub fn of(r: &RunRecord) -> Self {
        let status = serde_json::to_value(&r.outcome)
            .ok()
            .and_then(|v| v.get("status").and_then(|s| s.as_str()).map(String::from))
            .unwrap_or_default();
        RunSummary {
            id: r.id.clone(),
            query: r.query.clone(),
            status,
            answer: r.answer().map(String::from),
            started_at: r.started_at,
        }
    }
}

/// `<dir>/<id>.json` per run, artifacts under `<dir>/<id>/artifacts/`.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id).join("artifacts")
    }

    /// Writes the record to a temporary file and renames it into place, so
    /// readers see either nothing or the whole record.
    pub fn persist(&self, record: &RunRecord) -> std::io::Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(record).expect("run records serialize");
        bytes.push(b'\n');
        write_atomic(&self.dir, &format!("{}.json", record.id), &bytes)
    }

    pub fn read_bytes(&self, id: &str) -> Option<Vec<u8>> {
        if !is_uuid(id) {
            return None;
        }
        std::fs::read(self.dir.join(format!("{id}.json"))).ok()
    }

    pub fn read(&self, id: &str) -> Option<RunRecord> {
        serde_json::from_slice(&self.read_bytes(id)?).ok()
    }

    /// Every parseable record, newest first.
    pub fn records(&self) -> Vec<RunRecord> {
        let Ok(rd) = std::fs::read_dir(&self.dir) else {
            return Vec::new();
        };
        let mut out: Vec<RunRecord> = rd
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .filter_map(|p| serde_json::from_slice(&std::fs::read(p).ok()?).ok())
            .collect();
        out.sort_by(|a, b| b.started_at.cmp(&a.started_at).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn list(&self) -> Vec<RunSummary> {
        self.records().iter().map(RunSummary::of).collect()
    }

    /// Path of an artifact file if `name` is a plain file name inside the run's artifact directory.
    pub fn artifact_path(&self, id: &str, name: &str) -> Option<PathBuf> {
        let plain = !name.is_empty()
            && name != "."
            && name != ".."
            && !name.contains(['/', '\\'])
            && Path::new(name).file_name().is_some_and(|f| f == name);
        if !is_uuid(id) || !plain {
            return None;
        }
        let p = self.artifacts_dir(id).join(name);
        p.is_file().then_some(p)
    }
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

#[derive(Debug, Error)]
pub enum UploadError {
    #[error("upload exceeds {0} bytes")]
    TooLarge(usize),
    #[error("unsupported upload format; send a PNG image")]
    UnsupportedFormat,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadRef {
    /// Reference to pass in a query's `attachments`.
    pub id: String,
    pub bytes: usize,
}

#[derive(Debug, Clone)]
pub struct UploadStore {
    dir: PathBuf,
    pub cap: usize,
}

impl UploadStore {
    pub fn new(dir: impl Into<PathBuf>, cap: usize) -> Self {
        UploadStore { dir: dir.into(), cap }
    }

    pub fn save(&self, bytes: &[u8]) -> Result<UploadRef, UploadError> {
        if bytes.len() > self.cap {
            return Err(UploadError::TooLarge(self.cap));
        }
        if !bytes.starts_with(&PNG_MAGIC) || image::load_from_memory_with_format(bytes, image::ImageFormat::Png).is_err()
        {
            return Err(UploadError::UnsupportedFormat);
        }
        let id = uuid::Uuid::new_v4().to_string();
        write_atomic(&self.dir, &format!("{id}.png"), bytes)?;
        Ok(UploadRef { id, bytes: bytes.len() })
    }

    pub fn resolve(&self, id: &str) -> Option<PathBuf> {
        if !is_uuid(id) {
            return None;
        }
        let p = self.dir.join(format!("{id}.png"));
        p.is_file().then_some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_must_be_uuids() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunStore::new(dir.path());
        assert!(s.read_bytes("../etc/passwd").is_none());
        assert!(s.artifact_path(&uuid::Uuid::new_v4().to_string(), "../x").is_none());
        let u = UploadStore::new(dir.path(), 10);
        assert!(u.resolve("x.png").is_none());
    }

    #[test]
    fn uploads_check_size_and_format() {
        let dir = tempfile::tempdir().unwrap();
        let u = UploadStore::new(dir.path(), 16);
        assert!(matches!(u.save(&[0u8; 17]), Err(UploadError::TooLarge(16))));
        assert!(matches!(u.save(b"GIF89a"), Err(UploadError::UnsupportedFormat)));
        // right magic, broken stream
        assert!(matches!(u.save(&PNG_MAGIC), Err(UploadError::UnsupportedFormat)));
    }
}
