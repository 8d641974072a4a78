//! Deterministic stand-ins for the perception models: functions of image
//! content only, so repeated runs agree bit for bit.
//!
//! * `dofa_segmentation_tool`: class from quantized mean intensity; fails
//!   like an exhausted GPU when the image needs more than the simulated
//!   device memory (64 bytes per pixel).
//! * `dofa_classification_tool`: label = content digest mod 10.
//! * `object_detection_tool`: boxes from a ChaCha stream seeded with the
//!   content digest; blank images yield no boxes.
//! * `burn_scar_tool`: `SWIR2 > 0.3`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::builtins::image;
use super::external::{ToolRequest, ToolResponse};
use super::invoke::ToolError;
use super::{
    ArgSpec, ArgType, Binding, BuiltinFn, SensorSupport, ToolCategory, ToolSpec, TrainingDataset,
};
use crate::eval::ObbDetection;
use crate::raster::{load_raster, Mask, MaskValues, Raster};
use crate::value::Value;

pub const SEGMENTATION: &str = "dofa_segmentation_tool";
pub const CLASSIFICATION: &str = "dofa_classification_tool";
pub const DETECTION: &str = "object_detection_tool";
pub const BURN_SCAR: &str = "burn_scar_tool";

pub const SEGMENTATION_BYTES_PER_PIXEL: usize = 64;
pub const DEFAULT_GPU_MEMORY_MIB: f64 = 16.0;
pub const BURN_BAND: &str = "SWIR2";
pub const BURN_THRESHOLD: f32 = 0.3;
const BLANK_RANGE: f32 = 1e-6;
const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockConfig {
    /// Simulated device memory; `None` disables the limit.
    pub gpu_memory_mib: Option<f64>,
    /// Artificial latency per call.
    pub delay: Duration,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            gpu_memory_mib: Some(DEFAULT_GPU_MEMORY_MIB),
            delay: Duration::ZERO,
        }
    }
}

fn taxonomy(labels: &[&str], first_id: u32) -> BTreeMap<u32, String> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| (first_id + i as u32, l.to_string()))
        .collect()
}

pub fn flair2_taxonomy() -> BTreeMap<u32, String> {
    taxonomy(
        &[
            "building",
            "pervious surface",
            "impervious surface",
            "bare soil",
            "water",
            "coniferous",
            "deciduous",
            "brushwood",
            "vineyard",
            "herbaceous vegetation",
            "agricultural land",
            "plowed land",
            "others",
        ],
        1,
    )
}

pub fn eurosat_taxonomy() -> BTreeMap<u32, String> {
    taxonomy(
        &[
            "AnnualCrop",
            "Forest",
            "HerbaceousVegetation",
            "Highway",
            "Industrial",
            "Pasture",
            "PermanentCrop",
            "Residential",
            "River",
            "SeaLake",
        ],
        0,
    )
}

pub fn nwpu_vhr10_taxonomy() -> BTreeMap<u32, String> {
    taxonomy(
        &[
            "airplane",
            "ship",
            "storage tank",
            "baseball diamond",
            "tennis court",
            "basketball court",
            "ground track field",
            "harbor",
            "bridge",
            "vehicle",
        ],
        1,
    )
}

pub fn burn_taxonomy() -> BTreeMap<u32, String> {
    taxonomy(&["unburned", "burned"], 0)
}

fn digest(img: &Raster) -> [u8; 32] {
    let mut h = Sha256::new();
    Value::Raster(Arc::new(img.clone())).digest_into(&mut h);
    h.finalize().into()
}

fn intensity_bands(img: &Raster) -> Vec<&[f32]> {
    let rgb: Vec<&[f32]> = ["RED", "GREEN", "BLUE"]
        .iter()
        .filter_map(|b| img.band(b).ok())
        .collect();
    if rgb.len() == 3 {
        rgb
    } else {
        img.bands().iter().map(|b| b.values()).collect()
    }
}

/// Per-pixel FLAIR-2 class: `1 + min(floor(mean_intensity * 13), 12)`;
/// nodata pixels fall in class 13 ("others").
pub fn segment(img: &Raster, config: &MockConfig) -> Result<Mask, String> {
    let need = (img.pixel_count() * SEGMENTATION_BYTES_PER_PIXEL) as f64;
    if let Some(cap) = config.gpu_memory_mib {
        if need > cap * MIB {
            return Err(format!(
                "CUDA out of memory. Tried to allocate {:.2} MiB (GPU 0; {:.2} MiB total capacity; 0 bytes already allocated)",
                need / MIB,
                cap
            ));
        }
    }
    let bands = intensity_bands(img);
    let classes = (0..img.pixel_count())
        .map(|i| {
            if bands.iter().any(|b| img.is_nodata(b[i])) {
                return 13;
            }
            let mean = bands.iter().map(|b| b[i] as f64).sum::<f64>() / bands.len() as f64;
            let q = (mean.clamp(0.0, 1.0) * 13.0).floor() as u32;
            1 + q.min(12)
        })
        .collect();
    let mask = Mask::new(
        img.width(),
        img.height(),
        MaskValues::Class(classes),
        Some(flair2_taxonomy()),
    )
    .map_err(|e| e.to_string())?;
    mask.with_georef(img.geotransform(), img.crs())
        .map_err(|e| e.to_string())
}

pub fn classify(img: &Raster) -> (u32, String) {
    let d = digest(img);
    let id = (u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) % 10) as u32;
    (id, eurosat_taxonomy()[&id].clone())
}

fn is_blank(img: &Raster) -> bool {
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for band in img.bands() {
        for &v in band.values() {
            if !img.is_nodata(v) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (hi - lo).is_nan() || hi - lo < BLANK_RANGE
}

pub fn detect(img: &Raster) -> Vec<ObbDetection> {
    if is_blank(img) {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::from_seed(digest(img));
    let (w, h) = (img.width() as f64, img.height() as f64);
    let max_side = (w.min(h) / 4.0).max(2.0);
    let n = rng.random_range(1..=8);
    (0..n)
        .map(|_| {
            let cx = rng.random_range(0.0..w);
            let cy = rng.random_range(0.0..h);
            let bw = rng.random_range(1.0..=max_side);
            let bh = rng.random_range(1.0..=max_side);
            let angle = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            let class = rng.random_range(1..=10u32);
            let score = rng.random_range(0.3..1.0);
            ObbDetection::new(cx, cy, bw, bh, angle, class).with_score(score)
        })
        .collect()
}

pub fn burn_scars(img: &Raster) -> Result<Mask, String> {
    let band = img
        .band(BURN_BAND)
        .map_err(|_| format!("input lacks the {BURN_BAND} band"))?;
    let burned = band
        .iter()
        .map(|&v| !img.is_nodata(v) && v > BURN_THRESHOLD)
        .collect();
    Mask::new(
        img.width(),
        img.height(),
        MaskValues::Bool(burned),
        Some(burn_taxonomy()),
    )
    .and_then(|m| m.with_georef(img.geotransform(), img.crs()))
    .map_err(|e| e.to_string())
}

/// Runs a mock tool on an already loaded image.
pub fn run_mock(tool: &str, img: &Raster, config: &MockConfig) -> Result<Value, String> {
    match tool {
        SEGMENTATION => segment(img, config).map(|m| Value::Mask(Arc::new(m))),
        CLASSIFICATION => Ok(Value::Str(classify(img).1)),
        DETECTION => Ok(Value::Detections(Arc::new(detect(img)))),
        BURN_SCAR => burn_scars(img).map(|m| Value::Mask(Arc::new(m))),
        other => Err(format!("unknown mock tool {other}")),
    }
}

fn rgb_sensor(name: &str, norm: &str) -> SensorSupport {
    SensorSupport {
        sensor: name.into(),
        band_mapping: [("R", "RED"), ("G", "GREEN"), ("B", "BLUE")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        normalization: norm.into(),
    }
}

fn model(
    name: &str,
    general: &str,
    technical: &str,
    sensors: Vec<SensorSupport>,
    example: &str,
    datasets: Vec<TrainingDataset>,
    returns: &str,
) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        category: ToolCategory::Model,
        general_description: general.into(),
        technical_description: technical.into(),
        supported_sensors: Some(sensors),
        usage_example: Some(example.into()),
        training_datasets: Some(datasets),
        args: Some(vec![ArgSpec::required("image", ArgType::Image)]),
        returns: Some(returns.into()),
        binding: Binding::Builtin,
    }
}

/// Descriptions of the four model tools, bound in-process.
pub fn mock_model_tools() -> Vec<ToolSpec> {
    const UNIT: &str = "reflectance in [0, 1]; 8-bit images divided by 255";
    vec![
        model(
            SEGMENTATION,
            "Land-cover semantic segmentation of very-high-resolution aerial imagery with a DOFA foundation-model backbone.",
            "Input: image path or raster with RED, GREEN, BLUE bands. Output: class mask of the same size and georeferencing, one FLAIR-2 class id (1-13) per pixel. Use `k in mask` to test for a class and `(mask == k).sum()` to count its pixels.",
            vec![rgb_sensor("Aerial RGB orthophoto (IGN BD ORTHO, 0.2 m)", UNIT)],
            "segmented_mask = dofa_segmentation_tool(get_uploaded_image_path())\nprint(8 in segmented_mask)",
            vec![TrainingDataset {
                name: "FLAIR-2".into(),
                taxonomy: flair2_taxonomy(),
            }],
            "mask",
        ),
        model(
            CLASSIFICATION,
            "Scene classification of a satellite image patch with a DOFA foundation-model backbone.",
            "Input: image path or raster (RGB or multispectral). Output: the EuroSAT class label of the whole image as a string.",
            vec![
                rgb_sensor("Sentinel-2 RGB", UNIT),
                SensorSupport {
                    sensor: "Sentinel-2 L2A".into(),
                    band_mapping: [("B02", "BLUE"), ("B03", "GREEN"), ("B04", "RED"), ("B08", "NIR")]
                        .iter()
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect(),
                    normalization: "digital numbers divided by 10000".into(),
                },
            ],
            "label = dofa_classification_tool(get_uploaded_image_path())\nprint(label)",
            vec![TrainingDataset {
                name: "EuroSAT".into(),
                taxonomy: eurosat_taxonomy(),
            }],
            "str",
        ),
        model(
            DETECTION,
            "Oriented object detection in very-high-resolution imagery (YOLOv11-OBB).",
            "Input: image path or raster with RED, GREEN, BLUE bands. Output: list of oriented boxes (center, size and angle in pixels/radians, class id, score). `len(dets)` counts all boxes, `dets.count(k)` counts boxes of class k.",
            vec![rgb_sensor("VHR RGB (Google Earth, 0.5-2 m)", UNIT)],
            "dets = object_detection_tool(get_uploaded_image_path())\nprint(dets.count(10))",
            vec![TrainingDataset {
                name: "NWPU VHR-10".into(),
                taxonomy: nwpu_vhr10_taxonomy(),
            }],
            "detections",
        ),
        model(
            BURN_SCAR,
            "Burn-scar segmentation of Harmonized Landsat Sentinel-2 scenes (Prithvi-EO-2.0).",
            "Input: raster with a SWIR2 band (HLS B07) in reflectance. Output: boolean mask of burned pixels with the input's georeferencing; pass it to mask_area_m2(mask, 1) for the burned area.",
            vec![SensorSupport {
                sensor: "HLS".into(),
                band_mapping: [("B02", "BLUE"), ("B03", "GREEN"), ("B04", "RED"), ("B05", "NIR"), ("B06", "SWIR1"), ("B07", "SWIR2")]
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
                normalization: "surface reflectance scaled to [0, 1]".into(),
            }],
            "scene = fetch_scene(search_scenes(-121.0, 39.0, -120.0, 40.0, \"2023-08-01\", \"2023-09-30\", \"HLS\")[0])\nscar = burn_scar_tool(scene)\nprint(mask_area_m2(scar, 1))",
            vec![TrainingDataset {
                name: "HLS Burn Scars".into(),
                taxonomy: burn_taxonomy(),
            }],
            "mask",
        ),
    ]
}

pub(crate) fn mock_handlers(config: MockConfig) -> Vec<(ToolSpec, Arc<BuiltinFn>)> {
    mock_model_tools()
        .into_iter()
        .map(|spec| {
            let name = spec.name.clone();
            let f: Arc<BuiltinFn> = Arc::new(move |ctx, args| {
                let img = image(ctx, &name, &args[0])?;
                if !config.delay.is_zero() {
                    std::thread::sleep(config.delay);
                }
                run_mock(&name, &img, &config).map_err(|m| ToolError::failed(&name, m))
            });
            (spec, f)
        })
        .collect()
}

/// The same tools as manifests bound to an external command.
pub fn mock_manifests(cmd: &[String], timeout_s: f64) -> Vec<ToolSpec> {
    mock_model_tools()
        .into_iter()
        .map(|mut spec| {
            spec.binding = Binding::External {
                cmd: cmd.to_vec(),
                timeout_s,
                resources: Some("gpu".into()),
            };
            spec
        })
        .collect()
}

/// Serves one wire-protocol request: the body of an external mock tool.
pub fn serve_request(input: &[u8], config: &MockConfig) -> ToolResponse {
    let error = |message: String| ToolResponse::Error { message };
    let req: ToolRequest = match serde_json::from_slice(input) {
        Ok(r) => r,
        Err(e) => return error(format!("malformed request: {e}")),
    };
    let workdir = Path::new(&req.workdir);
    let args: Vec<Value> = match req
        .args
        .iter()
        .map(|a| Value::from_wire(a, workdir))
        .collect::<Result<_, _>>()
    {
        Ok(a) => a,
        Err(e) => return error(e.to_string()),
    };
    let img = match args.as_slice() {
        [Value::Raster(r)] => r.as_ref().clone(),
        [Value::Str(p)] => match load_raster(p) {
            Ok(r) => r,
            Err(e) => return error(e.to_string()),
        },
        _ => return error(format!("{} expects one image argument", req.tool)),
    };
    if !config.delay.is_zero() {
        std::thread::sleep(config.delay);
    }
    let out = workdir.join("out");
    let value = run_mock(&req.tool, &img, config).and_then(|v| {
        std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        v.to_wire(&out).map_err(|e| e.to_string())
    });
    match value {
        Ok(value) => ToolResponse::Ok { value },
        Err(message) => error(message),
    }
}
