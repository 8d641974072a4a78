//! Georeferenced raster data model.
//!
//! A [`Raster`] is an immutable stack of equally sized `f32` band planes with
//! a north-up affine geotransform, a CRS from the supported set and an
//! optional nodata sentinel. [`Mask`] carries per-pixel class ids or booleans
//! produced by segmentation tools and comparisons.

mod format;
mod mask;

pub use format::{load_mask, load_raster, save_mask, save_raster, PNG_BAND_NAMES};
pub use mask::{Mask, MaskValues};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical band vocabulary shared by index formulas and sensor mappings.
pub const CANONICAL_BANDS: [&str; 8] = [
    "RED", "GREEN", "BLUE", "NIR", "SWIR1", "SWIR2", "NIR900", "NIR970",
];

/// Sentinel used when an operation must introduce nodata and the input has none.
pub const DEFAULT_NODATA: f32 = -9999.0;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("payload size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("unknown band: {0}")]
    UnknownBand(String),
    #[error("empty band selection")]
    EmptySelection,
    #[error("window {col0},{row0} {w}x{h} outside {width}x{height} raster")]
    OutOfBounds {
        col0: usize,
        row0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("band {0} contains only nodata")]
    AllNodata(String),
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("unsupported crs: {0}")]
    UnsupportedCrs(String),
    #[error("image decoding failed: {0}")]
    Image(String),
}

/// Coordinate reference systems understood by the runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Crs {
    /// EPSG:4326, longitude/latitude in degrees.
    Wgs84,
    /// EPSG:3857, spherical Web Mercator in meters.
    WebMercator,
}

impl Crs {
    pub fn code(self) -> &'static str {
        match self {
            Crs::Wgs84 => "EPSG:4326",
            Crs::WebMercator => "EPSG:3857",
        }
    }
}

impl fmt::Display for Crs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Crs {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EPSG:4326" => Ok(Crs::Wgs84),
            "EPSG:3857" => Ok(Crs::WebMercator),
            _ => Err(RasterError::UnsupportedCrs(s.to_string())),
        }
    }
}

impl Serialize for Crs {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Crs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Affine map from pixel (col, row) to CRS coordinates, GDAL ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub pixel_w: f64,
    pub rot_x: f64,
    pub origin_y: f64,
    pub rot_y: f64,
    pub pixel_h: f64,
}

impl GeoTransform {
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_w: f64, pixel_h: f64) -> Self {
        GeoTransform {
            origin_x,
            pixel_w,
            rot_x: 0.0,
            origin_y,
            rot_y: 0.0,
            pixel_h,
        }
    }

    /// Placeholder georeference for imagery that carries none: 1 m pixels
    /// anchored at the Web Mercator origin.
    pub fn unit() -> Self {
        Self::north_up(0.0, 0.0, 1.0, -1.0)
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        GeoTransform {
            origin_x: a[0],
            pixel_w: a[1],
            rot_x: a[2],
            origin_y: a[3],
            rot_y: a[4],
            pixel_h: a[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [
            self.origin_x,
            self.pixel_w,
            self.rot_x,
            self.origin_y,
            self.rot_y,
            self.pixel_h,
        ]
    }

    /// World coordinate of the top-left corner of pixel (col, row).
    /// Fractional inputs address points inside the pixel.
    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + col * self.pixel_w + row * self.rot_x,
            self.origin_y + col * self.rot_y + row * self.pixel_h,
        )
    }

    pub fn is_north_up(&self) -> bool {
        self.rot_x == 0.0 && self.rot_y == 0.0 && self.pixel_w > 0.0 && self.pixel_h < 0.0
    }

    pub fn check_north_up(&self) -> Result<(), RasterError> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(RasterError::Invalid("non-finite geotransform".into()));
        }
        if !self.is_north_up() {
            return Err(RasterError::Invalid(
                "only north-up geotransforms (pixel_w > 0, pixel_h < 0, no rotation) are supported"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One band of pixel values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlane {
    values: Vec<f32>,
}

impl BandPlane {
    pub fn new(values: Vec<f32>) -> Self {
        BandPlane { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Summary statistics over the valid (non-nodata) pixels of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub valid_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: Vec<BandPlane>,
    band_names: Vec<String>,
    geotransform: GeoTransform,
    crs: Crs,
    nodata: Option<f32>,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        band_names: Vec<String>,
        bands: Vec<BandPlane>,
        geotransform: GeoTransform,
        crs: Crs,
        nodata: Option<f32>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if bands.is_empty() {
            return Err(RasterError::Invalid("raster needs at least one band".into()));
        }
        if band_names.len() != bands.len() {
            return Err(RasterError::Invalid(format!(
                "{} band names for {} bands",
                band_names.len(),
                bands.len()
            )));
        }
        for (i, name) in band_names.iter().enumerate() {
            if name.is_empty() {
                return Err(RasterError::Invalid("empty band name".into()));
            }
            if band_names[..i].contains(name) {
                return Err(RasterError::Invalid(format!("duplicate band name {name}")));
            }
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| RasterError::Invalid("raster too large".into()))?;
        if let Some(bad) = bands.iter().position(|b| b.len() != n) {
            return Err(RasterError::Invalid(format!(
                "band {} has {} values, expected {n}",
                band_names[bad],
                bands[bad].len()
            )));
        }
        geotransform.check_north_up()?;
        Ok(Raster {
            width,
            height,
            bands,
            band_names,
            geotransform,
            crs,
            nodata,
        })
    }

    /// Convenience constructor for a single band.
    pub fn single_band(
        width: usize,
        height: usize,
        name: &str,
        values: Vec<f32>,
        geotransform: GeoTransform,
        crs: Crs,
        nodata: Option<f32>,
    ) -> Result<Self, RasterError> {
        Raster::new(
            width,
            height,
            vec![name.to_string()],
            vec![BandPlane::new(values)],
            geotransform,
            crs,
            nodata,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn bands(&self) -> &[BandPlane] {
        &self.bands
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn geotransform(&self) -> GeoTransform {
        self.geotransform
    }

    pub fn crs(&self) -> Crs {
        self.crs
    }

    pub fn nodata(&self) -> Option<f32> {
        self.nodata
    }

    pub fn band_index(&self, name: &str) -> Option<usize> {
        self.band_names.iter().position(|n| n == name)
    }

    pub fn band(&self, name: &str) -> Result<&[f32], RasterError> {
        self.band_index(name)
            .map(|i| self.bands[i].values())
            .ok_or_else(|| RasterError::UnknownBand(name.to_string()))
    }

    /// True when `v` should be treated as missing. NaN is always missing.
    pub fn is_nodata(&self, v: f32) -> bool {
        is_nodata(self.nodata, v)
    }

    /// Size of the pixel payload in bytes.
    pub fn payload_bytes(&self) -> usize {
        self.pixel_count() * self.bands.len() * 4
    }

    pub fn with_nodata(mut self, nodata: Option<f32>) -> Self {
        self.nodata = nodata;
        self
    }

    /// Returns a raster whose bands appear in the order of `names`.
    pub fn select_bands<S: AsRef<str>>(&self, names: &[S]) -> Result<Raster, RasterError> {
        if names.is_empty() {
            return Err(RasterError::EmptySelection);
        }
        let mut bands = Vec::with_capacity(names.len());
        let mut band_names = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let idx = self
                .band_index(name)
                .ok_or_else(|| RasterError::UnknownBand(name.to_string()))?;
            bands.push(self.bands[idx].clone());
            band_names.push(name.to_string());
        }
        Raster::new(
            self.width,
            self.height,
            band_names,
            bands,
            self.geotransform,
            self.crs,
            self.nodata,
        )
    }

    /// Extracts a `w`×`h` window starting at (`col0`, `row0`).
    pub fn crop_window(
        &self,
        col0: usize,
        row0: usize,
        w: usize,
        h: usize,
    ) -> Result<Raster, RasterError> {
        let oob = || RasterError::OutOfBounds {
            col0,
            row0,
            w,
            h,
            width: self.width,
            height: self.height,
        };
        if w == 0 || h == 0 {
            return Err(oob());
        }
        let col1 = col0.checked_add(w).ok_or_else(oob)?;
        let row1 = row0.checked_add(h).ok_or_else(oob)?;
        if col1 > self.width || row1 > self.height {
            return Err(oob());
        }
        let bands = self
            .bands
            .iter()
            .map(|b| {
                let mut out = Vec::with_capacity(w * h);
                for row in row0..row1 {
                    let start = row * self.width;
                    out.extend_from_slice(&b.values[start + col0..start + col1]);
                }
                BandPlane::new(out)
            })
            .collect();
        let (ox, oy) = self.geotransform.pixel_to_world(col0 as f64, row0 as f64);
        let gt = GeoTransform {
            origin_x: ox,
            origin_y: oy,
            ..self.geotransform
        };
        Raster::new(w, h, self.band_names.clone(), bands, gt, self.crs, self.nodata)
    }

    pub fn raster_stats(&self, band: &str) -> Result<BandStats, RasterError> {
        let values = self.band(band)?;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for &v in values.iter().filter(|&&v| !self.is_nodata(v)) {
            let v = v as f64;
            min = min.min(v);
            max = max.max(v);
            sum += v;
            count += 1;
        }
        if count == 0 {
            return Err(RasterError::AllNodata(band.to_string()));
        }
        Ok(BandStats {
            min,
            max,
            mean: sum / count as f64,
            valid_count: count,
        })
    }
}

pub(crate) fn is_nodata(nodata: Option<f32>, v: f32) -> bool {
    v.is_nan()
        || match nodata {
            Some(nd) => v == nd || (nd.is_nan() && v.is_nan()),
            None => false,
        }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> GeoTransform {
        GeoTransform::north_up(10.0, 20.0, 0.1, -0.1)
    }

    fn rgbn() -> Raster {
        Raster::new(
            2,
            2,
            vec!["RED".into(), "GREEN".into(), "NIR".into()],
            vec![
                BandPlane::new(vec![1.0, 2.0, 3.0, 4.0]),
                BandPlane::new(vec![5.0, 6.0, 7.0, 8.0]),
                BandPlane::new(vec![9.0, 10.0, 11.0, 12.0]),
            ],
            gt(),
            Crs::Wgs84,
            None,
        )
        .unwrap()
    }

    #[test]
    fn select_reorders_bands() {
        let r = rgbn().select_bands(&["NIR", "RED"]).unwrap();
        assert_eq!(r.band_names(), ["NIR", "RED"]);
        assert_eq!(r.bands()[0].values(), [9.0, 10.0, 11.0, 12.0]);
        assert_eq!(r.geotransform(), gt());
        assert_eq!(r.crs(), Crs::Wgs84);
    }

    #[test]
    fn select_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            rgbn().select_bands(&empty),
            Err(RasterError::EmptySelection)
        ));
        assert!(matches!(
            rgbn().select_bands(&["SWIR1"]),
            Err(RasterError::UnknownBand(b)) if b == "SWIR1"
        ));
    }

    #[test]
    fn crop_full_extent_is_identity() {
        let r = rgbn();
        assert_eq!(r.crop_window(0, 0, 2, 2).unwrap(), r);
    }

    #[test]
    fn crop_single_pixel() {
        let r = rgbn().crop_window(1, 1, 1, 1).unwrap();
        assert_eq!(r.band("RED").unwrap(), [4.0]);
    }

    #[test]
    fn crop_shifts_origin() {
        let r = Raster::single_band(10, 10, "RED", vec![0.0; 100], gt(), Crs::Wgs84, None)
            .unwrap();
        let c = r.crop_window(5, 5, 2, 2).unwrap();
        let g = c.geotransform();
        assert!((g.origin_x - 10.5).abs() < 1e-12);
        assert!((g.origin_y - 19.5).abs() < 1e-12);
        assert_eq!(g.pixel_w, 0.1);
        assert_eq!(g.pixel_h, -0.1);
    }

    #[test]
    fn crop_out_of_bounds() {
        assert!(matches!(
            rgbn().crop_window(1, 0, 2, 1),
            Err(RasterError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn stats_basic_and_nodata() {
        let r = Raster::single_band(4, 1, "RED", vec![1.0, 2.0, 3.0, 4.0], gt(), Crs::Wgs84, None)
            .unwrap();
        let s = r.raster_stats("RED").unwrap();
        assert_eq!((s.min, s.max, s.mean, s.valid_count), (1.0, 4.0, 2.5, 4));

        let r = Raster::single_band(
            3,
            1,
            "RED",
            vec![1.0, -9999.0, 3.0],
            gt(),
            Crs::Wgs84,
            Some(-9999.0),
        )
        .unwrap();
        let s = r.raster_stats("RED").unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.valid_count, 2);

        let r = Raster::single_band(2, 1, "RED", vec![-1.0, -1.0], gt(), Crs::Wgs84, Some(-1.0))
            .unwrap();
        assert!(matches!(r.raster_stats("RED"), Err(RasterError::AllNodata(_))));
        assert!(matches!(r.raster_stats("NIR"), Err(RasterError::UnknownBand(_))));
    }

    #[test]
    fn rejects_bad_construction() {
        let dup = Raster::new(
            1,
            1,
            vec!["RED".into(), "RED".into()],
            vec![BandPlane::new(vec![0.0]), BandPlane::new(vec![0.0])],
            gt(),
            Crs::Wgs84,
            None,
        );
        assert!(dup.is_err());
        let rotated = GeoTransform { rot_x: 0.5, ..gt() };
        assert!(Raster::single_band(1, 1, "RED", vec![0.0], rotated, Crs::Wgs84, None).is_err());
        let south_up = GeoTransform::north_up(0.0, 0.0, 1.0, 1.0);
        assert!(Raster::single_band(1, 1, "RED", vec![0.0], south_up, Crs::Wgs84, None).is_err());
        assert!(Raster::single_band(2, 2, "RED", vec![0.0], gt(), Crs::Wgs84, None).is_err());
    }

    #[test]
    fn crs_parse() {
        assert_eq!("epsg:3857".parse::<Crs>().unwrap(), Crs::WebMercator);
        assert!("EPSG:32633".parse::<Crs>().is_err());
    }
}
