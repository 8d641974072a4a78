//! Scene search and retrieval behind a provider trait. The local catalog
//! reads an index file; a remote provider can implement the same trait.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoBounds;
use crate::raster::{load_raster, Crs, Raster, RasterError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog contains no scenes")]
    EmptyCatalog,
    #[error("unknown scene {0}")]
    UnknownScene(String),
    #[error("invalid search: {0}")]
    InvalidQuery(String),
    #[error("cannot read catalog index {path}: {message}")]
    Index { path: PathBuf, message: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub date: NaiveDate,
    pub sensor: String,
    /// `[min_lon, min_lat, max_lon, max_lat]` in EPSG:4326.
    pub footprint: [f64; 4],
    pub path: PathBuf,
}

pub trait SceneProvider: Send + Sync {
    /// Ids of scenes intersecting `bounds` within `[start, end]`, by date.
    /// An empty or `"any"` sensor matches every sensor.
    fn search(
        &self,
        bounds: &GeoBounds,
        start: NaiveDate,
        end: NaiveDate,
        sensor: &str,
    ) -> Result<Vec<String>, CatalogError>;

    fn fetch(&self, id: &str) -> Result<Raster, CatalogError>;
}

#[derive(Debug, Deserialize)]
struct IndexFile {
    scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone)]
pub struct LocalCatalog {
    root: PathBuf,
    scenes: Vec<SceneEntry>,
}

impl LocalCatalog {
    /// Opens an index file; relative scene paths resolve against its directory.
    pub fn open(index: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let index = index.as_ref();
        let err = |message: String| CatalogError::Index {
            path: index.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(index).map_err(|e| err(e.to_string()))?;
        let file: IndexFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let root = index.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(LocalCatalog {
            root,
            scenes: file.scenes,
        })
    }

    /// Directory holding the index; scene files live below it.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scenes(&self) -> &[SceneEntry] {
        &self.scenes
    }
}

impl SceneProvider for LocalCatalog {
    fn search(
        &self,
        bounds: &GeoBounds,
        start: NaiveDate,
        end: NaiveDate,
        sensor: &str,
    ) -> Result<Vec<String>, CatalogError> {
        if self.scenes.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        if bounds.crs != Crs::Wgs84 {
            return Err(CatalogError::InvalidQuery("bounds must be in EPSG:4326".into()));
        }
        if start > end {
            return Err(CatalogError::InvalidQuery(format!("{start} is after {end}")));
        }
        let any_sensor = sensor.is_empty() || sensor.eq_ignore_ascii_case("any");
        let mut hits: Vec<&SceneEntry> = self
            .scenes
            .iter()
            .filter(|s| any_sensor || s.sensor.eq_ignore_ascii_case(sensor))
            .filter(|s| s.date >= start && s.date <= end)
            .filter(|s| {
                let [x0, y0, x1, y1] = s.footprint;
                x0 <= bounds.max_x && bounds.min_x <= x1 && y0 <= bounds.max_y && bounds.min_y <= y1
            })
            .collect();
        hits.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        Ok(hits.into_iter().map(|s| s.id.clone()).collect())
    }

    fn fetch(&self, id: &str) -> Result<Raster, CatalogError> {
        if self.scenes.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        let entry = self
            .scenes
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| CatalogError::UnknownScene(id.to_string()))?;
        Ok(load_raster(self.root.join(&entry.path))?)
    }
}
