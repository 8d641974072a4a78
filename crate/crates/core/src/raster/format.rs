//! Sidecar raster format and 8-bit RGB image ingestion.
//!
//! A raster lives in two files: `<name>.json` holds the header and
//! `<name>.bin` the payload as little-endian `f32`, band-sequential,
//! row-major. Masks use the same layout with a single `MASK` band and an
//! extra `mask` header object.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BandPlane, Crs, GeoTransform, Mask, MaskValues, Raster, RasterError};

pub const PNG_BAND_NAMES: [&str; 3] = ["RED", "GREEN", "BLUE"];

const DTYPE: &str = "f32le";
const LAYOUT: &str = "band-sequential";
const MASK_BAND: &str = "MASK";
const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    width: usize,
    height: usize,
    bands: Vec<String>,
    crs: String,
    geotransform: [f64; 6],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodata: Option<f64>,
    dtype: String,
    layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<MaskHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskHeader {
    kind: MaskKind,
    georeferenced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    legend: Option<BTreeMap<u32, String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MaskKind {
    Bool,
    Class,
}

fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => (path.with_extension("json"), path.with_extension("bin")),
        _ => {
            let mut json = path.as_os_str().to_owned();
            json.push(".json");
            let mut bin = path.as_os_str().to_owned();
            bin.push(".bin");
            (PathBuf::from(json), PathBuf::from(bin))
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, RasterError> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            RasterError::MissingFile(path.to_path_buf())
        } else {
            RasterError::IoFailure(e)
        }
    })
}

/// Loads a sidecar raster (`.json`/`.bin`, or the shared stem) or a PNG image.
pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster, RasterError> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        return load_png(&read_file(path)?);
    }
    let (header_path, payload_path) = sidecar_paths(path);
    if !header_path.exists() && path.is_file() {
        // Extension-less upload: sniff for PNG.
        let bytes = read_file(path)?;
        if bytes.starts_with(&PNG_MAGIC) {
            return load_png(&bytes);
        }
        return Err(RasterError::MalformedHeader(format!(
            "{} is neither a sidecar header nor a PNG image",
            path.display()
        )));
    }
    // Masks read through this path surface as a single MASK band.
    let (_, raster) = read_sidecar(&header_path, &payload_path)?;
    Ok(raster)
}

fn read_sidecar(header_path: &Path, payload_path: &Path) -> Result<(Header, Raster), RasterError> {
    let header_bytes = read_file(header_path)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| RasterError::MalformedHeader(e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(RasterError::MalformedHeader(format!(
            "unsupported dtype {:?}, expected {DTYPE:?}",
            header.dtype
        )));
    }
    if header.layout != LAYOUT {
        return Err(RasterError::MalformedHeader(format!(
            "unsupported layout {:?}, expected {LAYOUT:?}",
            header.layout
        )));
    }
    let crs: Crs = header.crs.parse()?;
    let payload = read_file(payload_path)?;
    let n = header.width * header.height;
    let expected = n * header.bands.len() * 4;
    if payload.len() != expected {
        return Err(RasterError::SizeMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let bands = payload
        .chunks_exact(n.max(1) * 4)
        .map(|chunk| {
            BandPlane::new(
                chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect(),
            )
        })
        .collect();
    let raster = Raster::new(
        header.width,
        header.height,
        header.bands.clone(),
        bands,
        GeoTransform::from_array(header.geotransform),
        crs,
        header.nodata.map(|v| v as f32),
    )
    .map_err(|e| match e {
        RasterError::Invalid(msg) => RasterError::MalformedHeader(msg),
        other => other,
    })?;
    Ok((header, raster))
}

fn write_sidecar(
    path: &Path,
    header: &Header,
    planes: &[&[f32]],
) -> Result<PathBuf, RasterError> {
    let (header_path, payload_path) = sidecar_paths(path);
    let mut payload = Vec::with_capacity(planes.iter().map(|p| p.len() * 4).sum());
    for plane in planes {
        for v in plane.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let json = serde_json::to_vec_pretty(header)
        .map_err(|e| RasterError::MalformedHeader(e.to_string()))?;
    fs::write(&payload_path, payload)?;
    fs::write(&header_path, json)?;
    Ok(header_path)
}

/// Writes `r` as a sidecar pair and returns the header path.
pub fn save_raster(r: &Raster, path: impl AsRef<Path>) -> Result<PathBuf, RasterError> {
    let header = Header {
        width: r.width(),
        height: r.height(),
        bands: r.band_names().to_vec(),
        crs: r.crs().code().to_string(),
        geotransform: r.geotransform().to_array(),
        nodata: r.nodata().map(f64::from),
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
        mask: None,
    };
    let planes: Vec<&[f32]> = r.bands().iter().map(|b| b.values()).collect();
    write_sidecar(path.as_ref(), &header, &planes)
}

pub fn save_mask(m: &Mask, path: impl AsRef<Path>) -> Result<PathBuf, RasterError> {
    let (gt, crs) = m.georef().unwrap_or((GeoTransform::unit(), Crs::WebMercator));
    let kind = if m.is_boolean() {
        MaskKind::Bool
    } else {
        MaskKind::Class
    };
    let header = Header {
        width: m.width(),
        height: m.height(),
        bands: vec![MASK_BAND.into()],
        crs: crs.code().into(),
        geotransform: gt.to_array(),
        nodata: None,
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
        mask: Some(MaskHeader {
            kind,
            georeferenced: m.georef().is_some(),
            legend: m.legend().cloned(),
        }),
    };
    let plane: Vec<f32> = (0..m.len()).map(|i| m.get(i) as f32).collect();
    write_sidecar(path.as_ref(), &header, &[&plane])
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask, RasterError> {
    let (header_path, payload_path) = sidecar_paths(path.as_ref());
    let (header, raster) = read_sidecar(&header_path, &payload_path)?;
    let meta = header
        .mask
        .ok_or_else(|| RasterError::MalformedHeader("header lacks a mask section".into()))?;
    if raster.bands().len() != 1 {
        return Err(RasterError::MalformedHeader(
            "mask files carry exactly one band".into(),
        ));
    }
    let plane = raster.bands()[0].values();
    if let Some(bad) = plane.iter().find(|v| !(v.fract() == 0.0 && **v >= 0.0)) {
        return Err(RasterError::MalformedHeader(format!(
            "mask value {bad} is not a nonnegative integer"
        )));
    }
    let values = match meta.kind {
        MaskKind::Bool => {
            if plane.iter().any(|&v| v > 1.0) {
                return Err(RasterError::MalformedHeader(
                    "boolean mask holds values other than 0/1".into(),
                ));
            }
            MaskValues::Bool(plane.iter().map(|&v| v == 1.0).collect())
        }
        MaskKind::Class => MaskValues::Class(plane.iter().map(|&v| v as u32).collect()),
    };
    let mask = Mask::new(raster.width(), raster.height(), values, meta.legend)?;
    let georef = meta
        .georeferenced
        .then(|| (raster.geotransform(), raster.crs()));
    Ok(mask.with_georef_opt(georef))
}

fn load_png(bytes: &[u8]) -> Result<Raster, RasterError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| RasterError::Image(e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut planes: Vec<Vec<f32>> = (0..3).map(|_| Vec::with_capacity(w * h)).collect();
    for px in img.pixels() {
        for (c, plane) in planes.iter_mut().enumerate() {
            plane.push(px.0[c] as f32 / 255.0);
        }
    }
    Raster::new(
        w,
        h,
        PNG_BAND_NAMES.iter().map(|s| s.to_string()).collect(),
        planes.into_iter().map(BandPlane::new).collect(),
        GeoTransform::unit(),
        Crs::WebMercator,
        None,
    )
}
