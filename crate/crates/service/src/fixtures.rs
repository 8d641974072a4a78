//! Deterministic generator for the evaluation fixtures: images, scenes, a
//! scene catalog, question sets, scripted completions, mock-tool manifests
//! and tool-level sample files.
//!
//! Expected answers come from the construction of each input: class layouts
//! follow from the gray levels, areas from the spherical cell formula.
//! Detection and classification answers are whatever the mock model says
//! about the generated image, since the mock is the model under test there.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use geoscript_core::controller::query_digest;
use geoscript_core::eval::{DetectionFile, EvalQuestion, ObbDetection, Scenario};
use geoscript_core::geo::AUTHALIC_RADIUS_M;
use geoscript_core::raster::{
    load_raster, save_mask, save_raster, BandPlane, Crs, GeoTransform, Mask, MaskValues, Raster,
};
use geoscript_core::registry::mock::{self, flair2_taxonomy, mock_manifests};
use image::{Rgb, RgbImage};
use serde_json::json;

const BANDS: [&str; 6] = ["RED", "GREEN", "BLUE", "NIR", "SWIR1", "SWIR2"];

/// Gray levels whose mean intensity lands in one FLAIR-2 class.
const BRUSHWOOD: u8 = 148;
const AGRICULTURAL: u8 = 206;
const WATER: u8 = 88;
const BUILDING: u8 = 10;
const CONIFEROUS: u8 = 108;

pub const EXAMPLE_1_QUERY: &str = "Are there areas of brushwood in this uploaded image?";
pub const EXAMPLE_2_QUERY: &str = "List agricultural areas in the uploaded image.";

/// What a generation run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub questions: usize,
    pub per_scenario: BTreeMap<Scenario, usize>,
    pub files: Vec<String>,
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn path(&mut self, rel: &str) -> anyhow::Result<std::path::PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    fn text(&mut self, rel: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        std::fs::write(&p, text).with_context(|| p.display().to_string())
    }

    fn json(&mut self, rel: &str, value: &impl serde::Serialize) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(rel, &s)
    }

    fn png(&mut self, rel: &str, img: &RgbImage) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        img.save_with_format(&p, image::ImageFormat::Png)
            .with_context(|| p.display().to_string())
    }

    fn raster(&mut self, rel: &str, r: &Raster) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        self.files.push(rel.replace(".json", ".bin"));
        save_raster(r, &p)?;
        Ok(())
    }

    fn mask(&mut self, rel: &str, m: &Mask) -> anyhow::Result<()> {
        let p = self.path(rel)?;
        self.files.push(rel.replace(".json", ".bin"));
        save_mask(m, &p)?;
        Ok(())
    }
}

fn gray(w: u32, h: u32, level: impl Fn(u32, u32) -> u8) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = level(x, y);
        Rgb([v, v, v])
    })
}

fn split_image() -> RgbImage {
    gray(32, 32, |x, _| if x < 16 { BRUSHWOOD } else { AGRICULTURAL })
}

fn quadrant_image() -> RgbImage {
    gray(32, 32, |x, y| match (x < 16, y < 16) {
        (true, true) => BUILDING,
        (false, true) => CONIFEROUS,
        (true, false) => BRUSHWOOD,
        (false, false) => AGRICULTURAL,
    })
}

fn objects_a() -> RgbImage {
    RgbImage::from_fn(96, 96, |x, y| Rgb([(x * 2) as u8, (y * 2) as u8, 128]))
}

fn objects_b() -> RgbImage {
    RgbImage::from_fn(96, 96, |x, y| {
        let v = if (x / 8 + y / 8) % 2 == 0 { 40 } else { 200 };
        Rgb([v, v / 2, 255 - v])
    })
}

/// Per-pixel reflectances for the six canonical bands.
type Px = [f32; 6];

struct Scene {
    id: &'static str,
    date: &'static str,
    origin: (f64, f64),
    pixel_deg: f64,
    size: usize,
    pixel: fn(usize, usize) -> Px,
}

const ROCK: Px = [0.12, 0.15, 0.10, 0.35, 0.25, 0.15];
const SNOW: Px = [0.75, 0.80, 0.80, 0.70, 0.10, 0.05];
const FIELD: Px = [0.08, 0.12, 0.06, 0.45, 0.20, 0.10];
const POND: Px = [0.30, 0.35, 0.37, 0.04, 0.30, 0.01];
const CHAPARRAL: Px = [0.10, 0.10, 0.08, 0.30, 0.20, 0.15];
const BURNED: Px = [0.12, 0.09, 0.07, 0.10, 0.35, 0.45];

fn in_block(col: usize, row: usize, rows: (usize, usize), cols: (usize, usize)) -> bool {
    (rows.0..rows.1).contains(&row) && (cols.0..cols.1).contains(&col)
}

const POND_ROWS: (usize, usize) = (10, 18);
const POND_COLS: (usize, usize) = (6, 20);
const MALIBU_BURN: ((usize, usize), (usize, usize)) = ((8, 16), (4, 14));
const PALISADES_BURN: ((usize, usize), (usize, usize)) = ((4, 16), (2, 22));

fn scenes() -> Vec<Scene> {
    vec![
        Scene {
            id: "S2_alps_20230115",
            date: "2023-01-15",
            origin: (6.85, 46.05),
            pixel_deg: 0.002,
            size: 32,
            pixel: |_, row| if row < 16 { SNOW } else { ROCK },
        },
        Scene {
            id: "S2_alps_20230815",
            date: "2023-08-15",
            origin: (6.85, 46.05),
            pixel_deg: 0.002,
            size: 32,
            pixel: |_, _| ROCK,
        },
        Scene {
            id: "S2_beauce_20230610",
            date: "2023-06-10",
            origin: (1.60, 48.30),
            pixel_deg: 0.001,
            size: 32,
            pixel: |col, row| if in_block(col, row, POND_ROWS, POND_COLS) { POND } else { FIELD },
        },
        Scene {
            id: "S2_malibu_20241201",
            date: "2024-12-01",
            origin: (-118.53, 34.06),
            pixel_deg: 0.0003,
            size: 32,
            pixel: |_, _| CHAPARRAL,
        },
        Scene {
            id: "S2_malibu_20250120",
            date: "2025-01-20",
            origin: (-118.53, 34.06),
            pixel_deg: 0.0003,
            size: 32,
            pixel: |col, row| {
                if in_block(col, row, MALIBU_BURN.0, MALIBU_BURN.1) {
                    BURNED
                } else {
                    CHAPARRAL
                }
            },
        },
        Scene {
            id: "S2_palisades_20250125",
            date: "2025-01-25",
            origin: (-118.56, 34.08),
            pixel_deg: 0.0003,
            size: 32,
            pixel: |col, row| {
                if in_block(col, row, PALISADES_BURN.0, PALISADES_BURN.1) {
                    BURNED
                } else {
                    CHAPARRAL
                }
            },
        },
    ]
}

impl Scene {
    fn raster(&self) -> anyhow::Result<Raster> {
        let n = self.size;
        let mut planes: Vec<Vec<f32>> = BANDS.iter().map(|_| Vec::with_capacity(n * n)).collect();
        for row in 0..n {
            for col in 0..n {
                let px = (self.pixel)(col, row);
                for (b, plane) in planes.iter_mut().enumerate() {
                    plane.push(px[b]);
                }
            }
        }
        Ok(Raster::new(
            n,
            n,
            BANDS.iter().map(|s| s.to_string()).collect(),
            planes.into_iter().map(BandPlane::new).collect(),
            GeoTransform::north_up(self.origin.0, self.origin.1, self.pixel_deg, -self.pixel_deg),
            Crs::Wgs84,
            None,
        )?)
    }

    fn footprint(&self) -> [f64; 4] {
        let span = self.pixel_deg * self.size as f64;
        [self.origin.0, self.origin.1 - span, self.origin.0 + span, self.origin.1]
    }

    /// Area of one pixel in `row` on the authalic sphere.
    fn pixel_area_m2(&self, row: usize) -> f64 {
        let top = (self.origin.1 - self.pixel_deg * row as f64).to_radians();
        let bottom = (self.origin.1 - self.pixel_deg * (row + 1) as f64).to_radians();
        AUTHALIC_RADIUS_M * AUTHALIC_RADIUS_M * self.pixel_deg.to_radians() * (top.sin() - bottom.sin())
    }

    fn block_area_m2(&self, rows: (usize, usize), cols: (usize, usize)) -> f64 {
        (rows.0..rows.1).map(|r| self.pixel_area_m2(r)).sum::<f64>() * (cols.1 - cols.0) as f64
    }

    fn mean_ndvi(&self) -> f64 {
        let n = self.size;
        let mut sum = 0.0;
        for row in 0..n {
            for col in 0..n {
                let px = (self.pixel)(col, row);
                let (red, nir) = (px[0] as f64, px[3] as f64);
                sum += (nir - red) / (nir + red);
            }
        }
        sum / (n * n) as f64
    }
}

fn fenced(code: &str) -> String {
    format!("```python\n{}\n```", code.trim())
}

pub const EXAMPLE_1_CODE: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
brushwood_present = 8 in segmented_mask
print(brushwood_present)
";

pub const EXAMPLE_2_CODE: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
agricultural_areas = (segmented_mask == 11).sum()
print(agricultural_areas)
";

struct Q {
    id: &'static str,
    query: &'static str,
    attachments: Vec<&'static str>,
    expected: String,
}

fn question(q: &Q, scenario: Scenario) -> EvalQuestion {
    EvalQuestion {
        id: q.id.into(),
        query: q.query.into(),
        attachments: q.attachments.iter().map(Into::into).collect(),
        expected: q.expected.clone(),
        scenario,
    }
}

fn q(id: &'static str, query: &'static str, attachments: &[&'static str], expected: impl ToString) -> Q {
    Q {
        id,
        query,
        attachments: attachments.to_vec(),
        expected: expected.to_string(),
    }
}

fn round_to(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

fn mock_raster(img: &RgbImage) -> anyhow::Result<Raster> {
    let dir = tempfile::tempdir()?;
    let p = dir.path().join("i.png");
    img.save_with_format(&p, image::ImageFormat::Png)?;
    Ok(load_raster(&p)?)
}

/// Writes the fixture tree under `out`. Running it twice gives identical bytes.
pub fn generate(out: &Path) -> anyhow::Result<Generated> {
    let mut w = Writer { root: out, files: Vec::new() };

    let images: Vec<(&str, RgbImage)> = vec![
        ("brushwood.png", gray(64, 64, |_, _| BRUSHWOOD)),
        ("agricultural.png", gray(32, 32, |_, _| AGRICULTURAL)),
        ("water.png", gray(32, 32, |_, _| WATER)),
        ("coniferous.png", gray(32, 32, |_, _| CONIFEROUS)),
        ("split.png", split_image()),
        ("quadrants.png", quadrant_image()),
        ("fields_large.png", gray(640, 512, |_, _| AGRICULTURAL)),
        ("objects_a.png", objects_a()),
        ("objects_b.png", objects_b()),
    ];
    for (name, img) in &images {
        w.png(&format!("images/{name}"), img)?;
    }
    let image = |name: &str| images.iter().find(|(n, _)| *n == name).map(|(_, i)| i).expect("fixture image");

    let scenes = scenes();
    let mut entries = Vec::new();
    for s in &scenes {
        w.raster(&format!("scenes/{}.json", s.id), &s.raster()?)?;
        entries.push(json!({
            "id": s.id,
            "date": s.date,
            "sensor": "Sentinel-2",
            "footprint": s.footprint(),
            "path": format!("{}.json", s.id),
        }));
    }
    w.json("scenes/index.json", &json!({ "scenes": entries }))?;
    let scene = |id: &str| scenes.iter().find(|s| s.id == id).expect("fixture scene");

    let mut completions: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let mut add = |query: &str, attempts: &[String]| {
        let v = match attempts {
            [one] => json!(one),
            many => json!(many),
        };
        completions.insert(query_digest(query), v);
    };

    // land cover
    add(EXAMPLE_1_QUERY, &[fenced(EXAMPLE_1_CODE)]);
    add(EXAMPLE_2_QUERY, &[fenced(EXAMPLE_2_CODE)]);
    let water_q = "Is there water in this image?";
    add(
        water_q,
        &[fenced("m = dofa_segmentation_tool(get_uploaded_image_path())\nprint(m.count(5) > 0)")],
    );
    let building_q = "What fraction of the image is covered by buildings?";
    add(
        building_q,
        &["mask = dofa_segmentation_tool(get_uploaded_image_path())\nprint(round((mask == 1).mean(), 4))".into()],
    );
    let conifer_q = "Count the coniferous pixels in this image.";
    add(
        conifer_q,
        &[
            fenced("print(coniferous_counter_tool(get_uploaded_image_path()))"),
            fenced("mask = dofa_segmentation_tool(get_uploaded_image_path())\nprint(mask.count(6))"),
        ],
    );
    let brush_count_q = "How many pixels of brushwood are in this image?";
    add(
        brush_count_q,
        &[fenced("mask = dofa_segmentation_tool(get_uploaded_image_path())\nprint((mask == 8).sum())")],
    );
    let snow_q = "Is there snow in the uploaded scene?";
    add(
        snow_q,
        &[fenced(
            "scene = get_uploaded_image_path()\nsnow = ndsi(scene, [\"GREEN\", \"SWIR1\"]) > 0.4\nprint(snow.sum() > 0)",
        )],
    );
    let catalog_snow_q =
        "Was there snow in the Sentinel-2 imagery over the Alps between longitude 6.8 and 7.0, latitude 45.9 and 46.1, in January 2023?";
    add(
        catalog_snow_q,
        &[fenced(
            "ids = search_scenes(6.8, 45.9, 7.0, 46.1, \"2023-01-01\", \"2023-01-31\", \"Sentinel-2\")
scene = fetch_scene(ids[0])
snow = ndsi(scene, [\"GREEN\", \"SWIR1\"]) > 0.4
print(snow.sum() > 0)",
        )],
    );
    let ndvi_q = "What is the mean NDVI of the uploaded scene?";
    add(ndvi_q, &[fenced("print(round(ndvi(get_uploaded_image_path()).mean(), 3))")]);
    let water_area_q = "How many square meters of water are in the uploaded scene?";
    add(
        water_area_q,
        &[fenced(
            "mask = dofa_segmentation_tool(get_uploaded_image_path())\narea = mask_area_m2(mask, 5)\nprint(round(area))",
        )],
    );
    let eurosat_q = "Which EuroSAT land-use class does this image belong to?";
    add(eurosat_q, &[fenced("print(dofa_classification_tool(get_uploaded_image_path()))")]);
    let cloud_q = "Is this image free of clouds?";
    add(cloud_q, &[fenced("print(cloud_mask_tool(get_uploaded_image_path()).sum() == 0)")]);

    // wildfire burn
    let burn_q = "Is there a burn scar in the uploaded scene?";
    add(
        burn_q,
        &[fenced("scars = burn_scar_tool(get_uploaded_image_path())\nprint(scars.sum() > 0)")],
    );
    let burn_area_q = "What is the burned area in square meters in the uploaded scene?";
    add(
        burn_area_q,
        &[fenced(
            "scars = burn_scar_tool(get_uploaded_image_path())\nprint(round(mask_area_m2(scars, 1)))",
        )],
    );
    let burn_frac_q = "What fraction of the uploaded scene is burned?";
    add(
        burn_frac_q,
        &[fenced("print(round(burn_scar_tool(get_uploaded_image_path()).mean(), 4))")],
    );

    // wildfire objects
    let vehicles_q = "How many vehicles are in the uploaded image?";
    add(
        vehicles_q,
        &[fenced("dets = object_detection_tool(get_uploaded_image_path())\nprint(dets.count(10))")],
    );
    let objects_q = "How many objects were detected in the uploaded image?";
    add(objects_q, &[fenced("print(len(object_detection_tool(get_uploaded_image_path())))")]);
    let airplanes_q = "Are there any airplanes in the uploaded image?";
    add(
        airplanes_q,
        &[fenced("dets = object_detection_tool(get_uploaded_image_path())\nprint(dets.count(1) > 0)")],
    );
    w.json("completions.json", &completions)?;

    let beauce = scene("S2_beauce_20230610");
    let alps = scene("S2_alps_20230115");
    let malibu = scene("S2_malibu_20250120");
    let palisades = scene("S2_palisades_20250125");
    let (_, eurosat_name) = mock::classify(&mock_raster(image("brushwood.png"))?);

    let land_cover = vec![
        q("lc01", EXAMPLE_1_QUERY, &["../images/brushwood.png"], "True"),
        q("lc02", EXAMPLE_1_QUERY, &["../images/agricultural.png"], "False"),
        q("lc03", EXAMPLE_1_QUERY, &["../images/split.png"], "True"),
        q("lc04", EXAMPLE_1_QUERY, &["../images/water.png"], "False"),
        q("lc05", EXAMPLE_2_QUERY, &["../images/agricultural.png"], 32 * 32),
        q("lc06", EXAMPLE_2_QUERY, &["../images/split.png"], 16 * 32),
        q("lc07", EXAMPLE_2_QUERY, &["../images/quadrants.png"], 16 * 16),
        // exceeds the mock GPU budget: the run fails and is scored wrong
        q("lc08", EXAMPLE_2_QUERY, &["../images/fields_large.png"], 640 * 512),
        q("lc09", water_q, &["../images/water.png"], "True"),
        q("lc10", water_q, &["../images/brushwood.png"], "False"),
        q("lc11", building_q, &["../images/quadrants.png"], 0.25),
        q("lc12", building_q, &["../images/water.png"], 0),
        q("lc13", conifer_q, &["../images/coniferous.png"], 32 * 32),
        q("lc14", conifer_q, &["../images/quadrants.png"], 16 * 16),
        q("lc15", brush_count_q, &["../images/split.png"], 16 * 32),
        q("lc16", brush_count_q, &["../images/quadrants.png"], 16 * 16),
        q("lc17", snow_q, &["../scenes/S2_alps_20230115.json"], "True"),
        q("lc18", snow_q, &["../scenes/S2_beauce_20230610.json"], "False"),
        q("lc19", catalog_snow_q, &[], "True"),
        q("lc20", ndvi_q, &["../scenes/S2_beauce_20230610.json"], round_to(beauce.mean_ndvi(), 3)),
        q("lc21", ndvi_q, &["../scenes/S2_alps_20230115.json"], round_to(alps.mean_ndvi(), 3)),
        q(
            "lc22",
            water_area_q,
            &["../scenes/S2_beauce_20230610.json"],
            beauce.block_area_m2(POND_ROWS, POND_COLS).round(),
        ),
        q("lc23", eurosat_q, &["../images/brushwood.png"], eurosat_name),
        // the only tool that would answer this is not in the registry
        q("lc24", cloud_q, &["../images/brushwood.png"], "True"),
    ];

    let wildfire_burn = vec![
        q("wb01", burn_q, &["../scenes/S2_malibu_20250120.json"], "True"),
        q("wb02", burn_q, &["../scenes/S2_malibu_20241201.json"], "False"),
        q("wb03", burn_q, &["../scenes/S2_palisades_20250125.json"], "True"),
        q(
            "wb04",
            burn_area_q,
            &["../scenes/S2_malibu_20250120.json"],
            malibu.block_area_m2(MALIBU_BURN.0, MALIBU_BURN.1).round(),
        ),
        q(
            "wb05",
            burn_area_q,
            &["../scenes/S2_palisades_20250125.json"],
            palisades.block_area_m2(PALISADES_BURN.0, PALISADES_BURN.1).round(),
        ),
        q("wb06", burn_frac_q, &["../scenes/S2_palisades_20250125.json"], round_to(240.0 / 1024.0, 4)),
    ];

    let dets_a = mock::detect(&mock_raster(image("objects_a.png"))?);
    let dets_b = mock::detect(&mock_raster(image("objects_b.png"))?);
    let count = |d: &[ObbDetection], c: u32| d.iter().filter(|b| b.class_id == c).count();
    let wildfire_objects = vec![
        q("wo01", vehicles_q, &["../images/objects_a.png"], count(&dets_a, 10)),
        q("wo02", vehicles_q, &["../images/objects_b.png"], count(&dets_b, 10)),
        q("wo03", objects_q, &["../images/objects_a.png"], dets_a.len()),
        q("wo04", objects_q, &["../images/objects_b.png"], dets_b.len()),
        q("wo05", airplanes_q, &["../images/objects_a.png"], if count(&dets_a, 1) > 0 { "True" } else { "False" }),
        q("wo06", airplanes_q, &["../images/objects_b.png"], if count(&dets_b, 1) > 0 { "True" } else { "False" }),
    ];

    let mut per_scenario = BTreeMap::new();
    for (file, scenario, qs) in [
        ("datasets/land_cover.jsonl", Scenario::LandCover, &land_cover),
        ("datasets/wildfire_burn.jsonl", Scenario::WildfireBurn, &wildfire_burn),
        ("datasets/wildfire_objects.jsonl", Scenario::WildfireObjects, &wildfire_objects),
    ] {
        let mut text = String::new();
        for x in qs {
            text.push_str(&serde_json::to_string(&question(x, scenario))?);
            text.push('\n');
        }
        w.text(file, &text)?;
        per_scenario.insert(scenario, qs.len());
    }

    for spec in mock_manifests(&["geoscript".into(), "mock-tool".into()], 60.0) {
        w.json(&format!("manifests/{}.json", spec.name), &spec)?;
    }

    tool_level_samples(&mut w, &images, malibu, &dets_a)?;

    Ok(Generated {
        questions: per_scenario.values().sum(),
        per_scenario,
        files: w.files,
    })
}

fn tool_level_samples(
    w: &mut Writer<'_>,
    images: &[(&str, RgbImage)],
    burned: &Scene,
    dets: &[ObbDetection],
) -> anyhow::Result<()> {
    let classify = |name: &str| -> anyhow::Result<u32> {
        let img = images.iter().find(|(n, _)| *n == name).map(|(_, i)| i).expect("fixture image");
        Ok(mock::classify(&mock_raster(img)?).0)
    };
    let names = ["brushwood.png", "agricultural.png", "water.png", "coniferous.png", "split.png", "quadrants.png"];
    let pred: Vec<u32> = names.iter().map(|n| classify(n)).collect::<anyhow::Result<_>>()?;
    // hand labels; the first four agree with the mock
    let mut truth = pred.clone();
    truth[4] = (pred[4] + 1) % 10;
    truth[5] = (pred[5] + 3) % 10;
    w.json("tool_level/cls_pred.json", &pred)?;
    w.json("tool_level/cls_truth.json", &truth)?;

    // segmentation: the mock on split.png against labels whose boundary
    // sits two columns further left
    let split = mock_raster(&split_image())?;
    let seg_pred = mock::segment(&split, &Default::default()).map_err(anyhow::Error::msg)?;
    let seg_truth = Mask::new(
        32,
        32,
        MaskValues::Class((0..32 * 32).map(|i| if i % 32 < 14 { 8 } else { 11 }).collect()),
        Some(flair2_taxonomy()),
    )?;
    w.mask("tool_level/seg_pred.json", &seg_pred)?;
    w.mask("tool_level/seg_truth.json", &seg_truth)?;

    // burn: the mock on the burned scene against a block shifted one column right
    let burn_pred = mock::burn_scars(&burned.raster()?).map_err(anyhow::Error::msg)?;
    let (rows, cols) = MALIBU_BURN;
    let burn_truth = Mask::from_bools(
        32,
        32,
        (0..32 * 32).map(|i| in_block(i % 32, i / 32, rows, (cols.0 + 1, cols.1 + 1))).collect(),
    )?;
    w.mask("tool_level/burn_pred.json", &burn_pred)?;
    w.mask("tool_level/burn_truth.json", &burn_truth)?;

    // detection: labels drop the last mock box and nudge the first
    let mut truth_boxes: Vec<ObbDetection> = dets.iter().map(|d| ObbDetection { score: None, ..*d }).collect();
    truth_boxes.pop();
    if let Some(b) = truth_boxes.first_mut() {
        b.cx += 0.5;
    }
    w.json(
        "tool_level/det_pred.json",
        &[DetectionFile {
            image: "objects_a.png".into(),
            boxes: dets.to_vec(),
        }],
    )?;
    w.json(
        "tool_level/det_truth.json",
        &[DetectionFile {
            image: "objects_a.png".into(),
            boxes: truth_boxes,
        }],
    )?;
    Ok(())
}
