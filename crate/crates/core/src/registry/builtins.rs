use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;

use super::invoke::{ToolCtx, ToolError};
use super::{ArgSpec, ArgType, Binding, BuiltinFn, SensorSupport, ToolCategory, ToolSpec};
use crate::geo::{self, GeoBounds};
use crate::indices::{compute_index, BandMap, IndexKind, IndexParams};
use crate::raster::{save_mask, save_raster, Crs, Raster};
use crate::value::Value;

pub(crate) fn image(ctx: &ToolCtx, tool: &str, v: &Value) -> Result<Arc<Raster>, ToolError> {
    match v {
        Value::Raster(r) => Ok(r.clone()),
        Value::Str(path) => Ok(Arc::new(ctx.load_image(tool, path)?)),
        other => Err(ToolError::mismatch(tool, format!("expected an image, got {}", other.type_name()))),
    }
}

fn int(tool: &str, v: &Value) -> Result<i64, ToolError> {
    match v {
        Value::Int(i) => Ok(*i),
        other => Err(ToolError::mismatch(tool, format!("expected int, got {}", other.type_name()))),
    }
}

fn size(tool: &str, v: &Value) -> Result<usize, ToolError> {
    let i = int(tool, v)?;
    usize::try_from(i).map_err(|_| ToolError::mismatch(tool, format!("expected a nonnegative int, got {i}")))
}

fn float(tool: &str, v: &Value) -> Result<f64, ToolError> {
    v.as_f64()
        .filter(|_| matches!(v, Value::Int(_) | Value::Float(_)))
        .ok_or_else(|| ToolError::mismatch(tool, format!("expected a number, got {}", v.type_name())))
}

fn string<'a>(tool: &str, v: &'a Value) -> Result<&'a str, ToolError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(ToolError::mismatch(tool, format!("expected str, got {}", other.type_name()))),
    }
}

fn strings(tool: &str, v: &Value) -> Result<Vec<String>, ToolError> {
    match v {
        Value::List(items) => items.iter().map(|i| string(tool, i).map(str::to_string)).collect(),
        other => Err(ToolError::mismatch(tool, format!("expected a list of str, got {}", other.type_name()))),
    }
}

fn date(tool: &str, v: &Value) -> Result<NaiveDate, ToolError> {
    let s = string(tool, v)?;
    s.parse()
        .map_err(|_| ToolError::mismatch(tool, format!("expected a YYYY-MM-DD date, got {s:?}")))
}

fn raster(r: Raster) -> Value {
    Value::Raster(Arc::new(r))
}

fn data(name: &str, general: &str, technical: &str, args: Vec<ArgSpec>, returns: &str) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        category: ToolCategory::Data,
        general_description: general.into(),
        technical_description: technical.into(),
        supported_sensors: None,
        usage_example: None,
        training_datasets: None,
        args: Some(args),
        returns: Some(returns.into()),
        binding: Binding::Builtin,
    }
}

fn tool<F>(spec: ToolSpec, f: F) -> (ToolSpec, Arc<BuiltinFn>)
where
    F: Fn(&mut ToolCtx, &[Value]) -> Result<Value, ToolError> + Send + Sync + 'static,
{
    (spec, Arc::new(f))
}

fn sanitize(name: &str) -> Option<String> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    ok.then(|| name.to_string())
}

fn save_artifact(ctx: &mut ToolCtx, t: &str, args: &[Value]) -> Result<Value, ToolError> {
    let dir = ctx
        .artifacts_dir
        .clone()
        .ok_or_else(|| ToolError::failed(t, "artifact storage is not configured"))?;
    let name = sanitize(string(t, &args[1])?)
        .ok_or_else(|| ToolError::mismatch(t, "artifact names use letters, digits, '_' and '-' only"))?;
    std::fs::create_dir_all(&dir).map_err(|e| ToolError::failed(t, e.to_string()))?;
    let io = |e: crate::raster::RasterError| ToolError::failed(t, e.to_string());
    let path: PathBuf = match &args[0] {
        Value::Raster(r) => save_raster(r, dir.join(format!("{name}.json"))).map_err(io)?,
        Value::Mask(m) => save_mask(m, dir.join(format!("{name}.json"))).map_err(io)?,
        other => {
            let p = dir.join(format!("{name}.txt"));
            std::fs::write(&p, format!("{other}\n")).map_err(|e| ToolError::failed(t, e.to_string()))?;
            p
        }
    };
    ctx.artifacts.push(path.clone());
    Ok(Value::Str(path.to_string_lossy().into_owned()))
}

/// Sensor name, band mapping, normalization.
type SensorTable<'a> = (&'a str, &'a [(&'a str, &'a str)], &'a str);

fn index_sensors(kind: IndexKind) -> Vec<SensorSupport> {
    const REFLECTANCE: &str = "surface reflectance scaled to [0, 1]";
    let tables: [SensorTable; 4] = [
        (
            "Sentinel-2 L2A",
            &[("B02", "BLUE"), ("B03", "GREEN"), ("B04", "RED"), ("B08", "NIR"), ("B11", "SWIR1"), ("B12", "SWIR2")],
            "digital numbers divided by 10000",
        ),
        (
            "Landsat 8/9 OLI",
            &[("SR_B2", "BLUE"), ("SR_B3", "GREEN"), ("SR_B4", "RED"), ("SR_B5", "NIR"), ("SR_B6", "SWIR1"), ("SR_B7", "SWIR2")],
            REFLECTANCE,
        ),
        (
            "HLS",
            &[("B02", "BLUE"), ("B03", "GREEN"), ("B04", "RED"), ("B05", "NIR"), ("B06", "SWIR1"), ("B07", "SWIR2")],
            REFLECTANCE,
        ),
        (
            "Hyperspectral (e.g. EO-1 Hyperion)",
            &[("900 nm channel", "NIR900"), ("970 nm channel", "NIR970")],
            REFLECTANCE,
        ),
    ];
    let needed: Vec<&str> = kind
        .required_bands()
        .iter()
        .map(|b| if *b == "SWIR" { "SWIR1" } else { *b })
        .collect();
    tables
        .iter()
        .filter(|(_, bands, _)| needed.iter().all(|n| bands.iter().any(|(_, c)| c == n)))
        .map(|(sensor, bands, norm)| SensorSupport {
            sensor: sensor.to_string(),
            band_mapping: bands.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            normalization: norm.to_string(),
        })
        .collect()
}

fn index_spec(kind: IndexKind) -> ToolSpec {
    let name = kind.name().to_lowercase();
    let roles = kind.required_bands();
    let params: Vec<String> = kind
        .parameters(&IndexParams::default())
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    let mut technical = format!(
        "Input: a raster (or image path) with bands {}. Optional second argument: a list of band names used for those roles, in that order. Output: single-band raster named {}; pixels are nodata where any input is nodata or the denominator is zero.",
        roles.join(", "),
        kind.name()
    );
    if !params.is_empty() {
        technical.push_str(&format!(" Constants: {}.", params.join(", ")));
    }
    if kind == IndexKind::Ndsi {
        technical.push_str(" SWIR has no default band: pass [\"GREEN\", \"SWIR1\"] or [\"GREEN\", \"SWIR2\"].");
    }
    let example = if kind == IndexKind::Ndsi {
        "img = fetch_scene(\"S2_ALPS_20230115\")\nsnow = ndsi(img, [\"GREEN\", \"SWIR1\"])\nprint((snow > 0.4).sum() > 0)".to_string()
    } else {
        format!("img = load_image(get_uploaded_image_path())\nidx = {name}(img)\nprint(idx.mean())")
    };
    ToolSpec {
        name,
        category: ToolCategory::Model,
        general_description: kind.description().to_string(),
        technical_description: technical,
        supported_sensors: Some(index_sensors(kind)),
        usage_example: Some(example),
        training_datasets: Some(Vec::new()),
        args: Some(vec![
            ArgSpec::required("image", ArgType::Image),
            ArgSpec::optional("bands", ArgType::List),
        ]),
        returns: Some("raster".into()),
        binding: Binding::Builtin,
    }
}

fn index_tool(kind: IndexKind) -> (ToolSpec, Arc<BuiltinFn>) {
    let spec = index_spec(kind);
    let t = spec.name.clone();
    tool(spec, move |ctx, args| {
        let img = image(ctx, &t, &args[0])?;
        let mut map = BandMap::identity();
        if let Some(bands) = args.get(1) {
            let bands = strings(&t, bands)?;
            let roles = kind.required_bands();
            if bands.len() != roles.len() {
                return Err(ToolError::mismatch(
                    &t,
                    format!("expected {} band names ({}), got {}", roles.len(), roles.join(", "), bands.len()),
                ));
            }
            for (role, band) in roles.iter().zip(&bands) {
                map = map.with(role, band);
            }
        }
        compute_index(kind, &img, &map, &IndexParams::default())
            .map(raster)
            .map_err(|e| ToolError::failed(&t, e.to_string()))
    })
}

pub(crate) fn builtin_tools() -> Vec<(ToolSpec, Arc<BuiltinFn>)> {
    use ArgType::*;
    let mut tools = vec![
        tool(
            data(
                "get_uploaded_image_path",
                "Returns the file path of an image the user uploaded with the query.",
                "Input: optional upload index (default 0, the first upload). Output: path string accepted by every tool taking an image.",
                vec![ArgSpec::optional("index", Int)],
                "str",
            ),
            |ctx, args| {
                let t = "get_uploaded_image_path";
                let i = match args.first() {
                    Some(v) => size(t, v)?,
                    None => 0,
                };
                if ctx.uploads.is_empty() {
                    return Err(ToolError::failed(t, "no image was uploaded with this query"));
                }
                let p = ctx.uploads.get(i).ok_or_else(|| {
                    ToolError::failed(t, format!("upload index {i} out of range ({} uploaded)", ctx.uploads.len()))
                })?;
                Ok(Value::Str(p.to_string_lossy().into_owned()))
            },
        ),
        tool(
            data(
                "load_image",
                "Loads an uploaded image or a stored raster into memory.",
                "Input: path string. Output: raster. 8-bit PNG images load as bands RED, GREEN, BLUE scaled to [0, 1].",
                vec![ArgSpec::required("path", Str)],
                "raster",
            ),
            |ctx, args| {
                let path = string("load_image", &args[0])?;
                Ok(raster(ctx.load_image("load_image", path)?))
            },
        ),
        tool(
            data(
                "search_scenes",
                "Searches the satellite scene catalog by area, date range and sensor.",
                "Input: min_lon, min_lat, max_lon, max_lat (degrees), start and end dates as \"YYYY-MM-DD\", sensor name (\"any\" for all). Output: list of scene ids sorted by acquisition date.",
                vec![
                    ArgSpec::required("min_lon", Float),
                    ArgSpec::required("min_lat", Float),
                    ArgSpec::required("max_lon", Float),
                    ArgSpec::required("max_lat", Float),
                    ArgSpec::required("start_date", Str),
                    ArgSpec::required("end_date", Str),
                    ArgSpec::required("sensor", Str),
                ],
                "list",
            ),
            |ctx, args| {
                let t = "search_scenes";
                let provider = ctx
                    .scenes
                    .clone()
                    .ok_or_else(|| ToolError::failed(t, "no scene catalog is configured"))?;
                let c: Vec<f64> = args[..4].iter().map(|v| float(t, v)).collect::<Result<_, _>>()?;
                let bounds = GeoBounds::new(c[0], c[1], c[2], c[3], Crs::Wgs84)
                    .map_err(|e| ToolError::mismatch(t, e.to_string()))?;
                let ids = provider
                    .search(&bounds, date(t, &args[4])?, date(t, &args[5])?, string(t, &args[6])?)
                    .map_err(|e| ToolError::failed(t, e.to_string()))?;
                Ok(Value::List(ids.into_iter().map(Value::Str).collect()))
            },
        ),
        tool(
            data(
                "fetch_scene",
                "Retrieves a catalog scene as a multi-band raster.",
                "Input: scene id from search_scenes. Output: raster with canonical band names (BLUE, GREEN, RED, NIR, SWIR1, SWIR2, ...) in reflectance [0, 1].",
                vec![ArgSpec::required("scene_id", Str)],
                "raster",
            ),
            |ctx, args| {
                let t = "fetch_scene";
                let provider = ctx
                    .scenes
                    .clone()
                    .ok_or_else(|| ToolError::failed(t, "no scene catalog is configured"))?;
                provider
                    .fetch(string(t, &args[0])?)
                    .map(raster)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "select_bands",
                "Keeps a subset of bands, in the given order.",
                "Input: raster, list of band names. Output: raster with exactly those bands.",
                vec![ArgSpec::required("image", Image), ArgSpec::required("bands", List)],
                "raster",
            ),
            |ctx, args| {
                let t = "select_bands";
                let img = image(ctx, t, &args[0])?;
                let names = strings(t, &args[1])?;
                img.select_bands(&names)
                    .map(raster)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "crop",
                "Cuts a pixel window out of a raster.",
                "Input: raster, col0, row0, width, height (pixels). Output: raster whose georeferencing is shifted to the window.",
                vec![
                    ArgSpec::required("image", Image),
                    ArgSpec::required("col0", Int),
                    ArgSpec::required("row0", Int),
                    ArgSpec::required("width", Int),
                    ArgSpec::required("height", Int),
                ],
                "raster",
            ),
            |ctx, args| {
                let t = "crop";
                let img = image(ctx, t, &args[0])?;
                let [c, r, w, h] = [size(t, &args[1])?, size(t, &args[2])?, size(t, &args[3])?, size(t, &args[4])?];
                img.crop_window(c, r, w, h)
                    .map(raster)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "band_stats",
                "Summary statistics of one band, ignoring nodata.",
                "Input: raster, band name. Output: list [min, max, mean, valid_count].",
                vec![ArgSpec::required("image", Image), ArgSpec::required("band", Str)],
                "list",
            ),
            |ctx, args| {
                let t = "band_stats";
                let img = image(ctx, t, &args[0])?;
                let s = img
                    .raster_stats(string(t, &args[1])?)
                    .map_err(|e| ToolError::failed(t, e.to_string()))?;
                Ok(Value::List(vec![
                    Value::Float(s.min),
                    Value::Float(s.max),
                    Value::Float(s.mean),
                    Value::Int(s.valid_count as i64),
                ]))
            },
        ),
        tool(
            data(
                "reproject",
                "Reprojects a raster between geographic and Web Mercator coordinates.",
                "Input: raster, target CRS \"EPSG:4326\" or \"EPSG:3857\". Output: raster resampled by nearest neighbour, keeping the ground resolution of the center pixel.",
                vec![ArgSpec::required("image", Image), ArgSpec::required("crs", Str)],
                "raster",
            ),
            |ctx, args| {
                let t = "reproject";
                let img = image(ctx, t, &args[0])?;
                let crs: Crs = string(t, &args[1])?
                    .parse()
                    .map_err(|e: crate::raster::RasterError| ToolError::mismatch(t, e.to_string()))?;
                geo::reproject(&img, crs)
                    .map(raster)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "mosaic",
                "Merges rasters on the same grid into one covering their union.",
                "Input: list of rasters sharing CRS, pixel size and bands. Output: raster; where several inputs have valid data the earliest in the list wins.",
                vec![ArgSpec::required("images", List)],
                "raster",
            ),
            |ctx, args| {
                let t = "mosaic";
                let Value::List(items) = &args[0] else {
                    unreachable!("checked by schema")
                };
                let rasters: Vec<crate::raster::Raster> = items
                    .iter()
                    .map(|v| image(ctx, t, v).map(|r| (*r).clone()))
                    .collect::<Result<_, _>>()?;
                geo::mosaic(&rasters)
                    .map(raster)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "make_tiles",
                "Splits a raster into a grid of tiles.",
                "Input: raster, tile width, tile height (pixels). Output: list of rasters in row-major order; edge tiles may be smaller.",
                vec![
                    ArgSpec::required("image", Image),
                    ArgSpec::required("tile_w", Int),
                    ArgSpec::required("tile_h", Int),
                ],
                "list",
            ),
            |ctx, args| {
                let t = "make_tiles";
                let img = image(ctx, t, &args[0])?;
                let grid = geo::make_tiles(&img, size(t, &args[1])?, size(t, &args[2])?)
                    .map_err(|e| ToolError::failed(t, e.to_string()))?;
                Ok(Value::List(grid.tiles.into_iter().map(|tile| raster(tile.raster)).collect()))
            },
        ),
        tool(
            data(
                "mask_area_m2",
                "Ground area covered by one class of a georeferenced mask.",
                "Input: mask, class id (1 selects true pixels of a boolean mask). Output: area in square meters on a sphere of radius 6371008.8 m.",
                vec![ArgSpec::required("mask", Mask), ArgSpec::required("class_id", Int)],
                "float",
            ),
            |_ctx, args| {
                let t = "mask_area_m2";
                let Value::Mask(m) = &args[0] else {
                    unreachable!("checked by schema")
                };
                let class = u32::try_from(int(t, &args[1])?)
                    .map_err(|_| ToolError::mismatch(t, "class id must be nonnegative"))?;
                let (gt, crs) = m
                    .georef()
                    .ok_or_else(|| ToolError::failed(t, "mask has no georeferencing"))?;
                geo::mask_area_m2(m, &gt, crs, class)
                    .map(Value::Float)
                    .map_err(|e| ToolError::failed(t, e.to_string()))
            },
        ),
        tool(
            data(
                "save_artifact",
                "Stores a result so it is shown to the user and kept with the run.",
                "Input: any value, artifact name (letters, digits, '_' or '-'). Output: path of the stored file. Rasters and masks are stored in the sidecar raster format, other values as text.",
                vec![ArgSpec::required("value", Any), ArgSpec::required("name", Str)],
                "str",
            ),
            |ctx, args| save_artifact(ctx, "save_artifact", args),
        ),
    ];
    tools.extend(IndexKind::ALL.into_iter().map(index_tool));
    tools
}
