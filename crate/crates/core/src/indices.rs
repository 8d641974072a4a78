//! Classical spectral indices over [`Raster`] bands.
//!
//! Every index is evaluated per pixel in `f64` and stored as `f32`. Pixels
//! where an input is nodata, or where the denominator magnitude falls below
//! `epsilon_denominator`, become nodata in the output.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BandPlane, Raster, RasterError, DEFAULT_NODATA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndexKind {
    Ndvi,
    Savi,
    Evi,
    Ndwi,
    Wbi,
    Ndsi,
    Sr,
    Nwi1,
    Nwi2,
}

impl IndexKind {
    pub const ALL: [IndexKind; 9] = [
        IndexKind::Ndvi,
        IndexKind::Savi,
        IndexKind::Evi,
        IndexKind::Ndwi,
        IndexKind::Wbi,
        IndexKind::Ndsi,
        IndexKind::Sr,
        IndexKind::Nwi1,
        IndexKind::Nwi2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Ndvi => "NDVI",
            IndexKind::Savi => "SAVI",
            IndexKind::Evi => "EVI",
            IndexKind::Ndwi => "NDWI",
            IndexKind::Wbi => "WBI",
            IndexKind::Ndsi => "NDSI",
            IndexKind::Sr => "SR",
            IndexKind::Nwi1 => "NWI1",
            IndexKind::Nwi2 => "NWI2",
        }
    }

    /// Formula roles in argument order. `SWIR` (NDSI) has no canonical
    /// default and must be mapped explicitly to SWIR1 or SWIR2.
    pub fn required_bands(self) -> &'static [&'static str] {
        match self {
            IndexKind::Ndvi | IndexKind::Savi | IndexKind::Sr => &["NIR", "RED"],
            IndexKind::Evi => &["NIR", "RED", "BLUE"],
            IndexKind::Ndwi => &["GREEN", "NIR"],
            IndexKind::Wbi => &["NIR900", "NIR970"],
            IndexKind::Ndsi => &["GREEN", "SWIR"],
            IndexKind::Nwi1 => &["NIR", "SWIR1"],
            IndexKind::Nwi2 => &["NIR", "SWIR2"],
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            IndexKind::Ndvi => "Normalized Difference Vegetation Index, (NIR - RED) / (NIR + RED)",
            IndexKind::Savi => {
                "Soil Adjusted Vegetation Index, (NIR - RED) / (NIR + RED + L) * (1 + L)"
            }
            IndexKind::Evi => {
                "Enhanced Vegetation Index, G * (NIR - RED) / (NIR + C1*RED - C2*BLUE + L)"
            }
            IndexKind::Ndwi => "Normalized Difference Water Index, (GREEN - NIR) / (GREEN + NIR)",
            IndexKind::Wbi => "Water Band Index, NIR900 / NIR970",
            IndexKind::Ndsi => "Normalized Difference Snow Index, (GREEN - SWIR) / (GREEN + SWIR)",
            IndexKind::Sr => "Simple Ratio, NIR / RED",
            IndexKind::Nwi1 => "Normalized Water Index 1, (NIR - SWIR1) / (NIR + SWIR1)",
            IndexKind::Nwi2 => "Normalized Water Index 2, (NIR - SWIR2) / (NIR + SWIR2)",
        }
    }

    /// Parameters the formula reads.
    pub fn parameters(self, p: &IndexParams) -> Vec<(&'static str, f64)> {
        match self {
            IndexKind::Savi => vec![("L", p.l_savi)],
            IndexKind::Evi => vec![("G", p.gain), ("C1", p.c1), ("C2", p.c2), ("L", p.l_evi)],
            _ => vec![],
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexKind {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        IndexKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| IndexError::UnknownIndex(s.to_string()))
    }
}

/// Formula constants. EVI's background term is kept separate from SAVI's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub l_savi: f64,
    pub l_evi: f64,
    pub gain: f64,
    pub c1: f64,
    pub c2: f64,
    pub epsilon_denominator: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            l_savi: 0.5,
            l_evi: 1.0,
            gain: 2.5,
            c1: 6.0,
            c2: 7.5,
            epsilon_denominator: 1e-8,
        }
    }
}

impl IndexParams {
    fn validate(&self) -> Result<(), IndexError> {
        let all = [self.l_savi, self.l_evi, self.gain, self.c1, self.c2, self.epsilon_denominator];
        if all.iter().any(|v| !v.is_finite()) || self.epsilon_denominator <= 0.0 {
            return Err(IndexError::InvalidParams);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{kind} needs band {band} but the raster does not provide it")]
    MissingBand { kind: IndexKind, band: String },
    #[error("band planes differ in shape")]
    ShapeMismatch,
    #[error("unknown index {0}")]
    UnknownIndex(String),
    #[error("index parameters must be finite with epsilon > 0")]
    InvalidParams,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Maps formula roles (e.g. `NIR`) to raster band names. Roles without an
/// entry resolve to the band of the same name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BandMap(BTreeMap<String, String>);

impl BandMap {
    pub fn identity() -> Self {
        BandMap::default()
    }

    pub fn with(mut self, role: &str, band: &str) -> Self {
        self.0.insert(role.to_string(), band.to_string());
        self
    }

    pub fn resolve<'a>(&'a self, role: &'a str) -> &'a str {
        self.0.get(role).map(String::as_str).unwrap_or(role)
    }
}

/// Entry of the index listing used to build tool descriptions.
#[derive(Debug, Clone, Serialize)]
pub struct IndexInfo {
    pub kind: IndexKind,
    pub required_bands: Vec<&'static str>,
    pub parameters: Vec<(&'static str, f64)>,
    pub description: &'static str,
}

pub fn list_indices() -> Vec<IndexInfo> {
    let defaults = IndexParams::default();
    IndexKind::ALL
        .into_iter()
        .map(|kind| IndexInfo {
            kind,
            required_bands: kind.required_bands().to_vec(),
            parameters: kind.parameters(&defaults),
            description: kind.description(),
        })
        .collect()
}

/// Evaluates one pixel; `None` means the denominator is degenerate.
fn eval_pixel(kind: IndexKind, b: &[f64], p: &IndexParams) -> Option<f64> {
    let guard = |num: f64, den: f64| (den.abs() >= p.epsilon_denominator).then(|| num / den);
    match kind {
        IndexKind::Ndvi | IndexKind::Ndwi | IndexKind::Ndsi | IndexKind::Nwi1 | IndexKind::Nwi2 => {
            guard(b[0] - b[1], b[0] + b[1])
        }
        IndexKind::Savi => {
            guard(b[0] - b[1], b[0] + b[1] + p.l_savi).map(|v| v * (1.0 + p.l_savi))
        }
        IndexKind::Evi => guard(
            p.gain * (b[0] - b[1]),
            b[0] + p.c1 * b[1] - p.c2 * b[2] + p.l_evi,
        ),
        IndexKind::Wbi | IndexKind::Sr => guard(b[0], b[1]),
    }
}

/// Computes `kind` over `r`, producing a single-band raster named after the index.
pub fn compute_index(
    kind: IndexKind,
    r: &Raster,
    band_map: &BandMap,
    params: &IndexParams,
) -> Result<Raster, IndexError> {
    params.validate()?;
    let inputs: Vec<&[f32]> = kind
        .required_bands()
        .iter()
        .map(|role| {
            let name = band_map.resolve(role);
            r.band(name).map_err(|_| IndexError::MissingBand {
                kind,
                band: name.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    let n = r.pixel_count();
    if inputs.iter().any(|b| b.len() != n) {
        return Err(IndexError::ShapeMismatch);
    }
    let nodata = r.nodata().unwrap_or(DEFAULT_NODATA);
    let mut px = vec![0.0f64; inputs.len()];
    let out: Vec<f32> = (0..n)
        .map(|i| {
            for (slot, band) in px.iter_mut().zip(&inputs) {
                let v = band[i];
                if r.is_nodata(v) {
                    return nodata;
                }
                *slot = v as f64;
            }
            match eval_pixel(kind, &px, params) {
                Some(v) if v.is_finite() => v as f32,
                _ => nodata,
            }
        })
        .collect();
    Ok(Raster::new(
        r.width(),
        r.height(),
        vec![kind.name().to_string()],
        vec![BandPlane::new(out)],
        r.geotransform(),
        r.crs(),
        Some(nodata),
    )?)
}
