//! Geospatial operators: Web Mercator projection, reprojection, tiling,
//! mosaicking and mask area.

mod area;
pub mod mercator;
mod mosaic;
mod reproject;
mod tiles;

pub use area::{bounds_area_m2, mask_area_m2, AUTHALIC_RADIUS_M};
pub use mosaic::mosaic;
pub use reproject::reproject;
pub use tiles::{make_tiles, Tile, TileGrid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Crs, Raster, RasterError};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("unsupported crs: {0}")]
    UnsupportedCrs(String),
    #[error("latitude {0:.6} outside the Web Mercator domain")]
    LatitudeOutOfRange(f64),
    #[error("crs mismatch: {0} vs {1}")]
    CrsMismatch(Crs, Crs),
    #[error("grids are misaligned: {0}")]
    GridMisaligned(String),
    #[error("invalid tile size {0}x{1}")]
    InvalidTileSize(usize, usize),
    #[error("mosaic needs at least one raster")]
    EmptyInput,
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Axis-aligned extent in CRS units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub crs: Crs,
}

impl GeoBounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64, crs: Crs) -> Result<Self, GeoError> {
        if !(min_x < max_x && min_y < max_y) {
            return Err(GeoError::InvalidBounds(format!(
                "[{min_x}, {min_y}, {max_x}, {max_y}]"
            )));
        }
        Ok(GeoBounds {
            min_x,
            min_y,
            max_x,
            max_y,
            crs,
        })
    }

    pub fn of_raster(r: &Raster) -> Self {
        let gt = r.geotransform();
        let (x0, y0) = gt.pixel_to_world(0.0, 0.0);
        let (x1, y1) = gt.pixel_to_world(r.width() as f64, r.height() as f64);
        GeoBounds {
            min_x: x0.min(x1),
            min_y: y0.min(y1),
            max_x: x0.max(x1),
            max_y: y0.max(y1),
            crs: r.crs(),
        }
    }

    /// Closed-interval overlap test; touching edges count as intersecting.
    pub fn intersects(&self, other: &GeoBounds) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }
}
