//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print.
//! Exits nonzero when any criterion other than the known-red one fails, or
//! when the known-red one unexpectedly passes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use geoscript_core::controller::{Controller, LlmBackend, ScriptedBackend};
use geoscript_core::eval::{eval_llm_level, map50, obb_iou, ObbDetection};
use geoscript_core::geo::mercator::{lonlat_to_mercator, mercator_to_lonlat};
use geoscript_core::geo::{make_tiles, mask_area_m2, mosaic, AUTHALIC_RADIUS_M};
use geoscript_core::indices::{compute_index, BandMap, IndexKind, IndexParams};
use geoscript_core::raster::{load_raster, save_raster, BandPlane, Crs, GeoTransform, Mask, Raster, CANONICAL_BANDS};
use geoscript_core::registry::{MockConfig, Registry, ToolCtx, ToolError};
use geoscript_core::script::{
    execute, execute_script, parse_program, print_program, validate_calls, BinOp, Expr, ExprKind, LimitKind, Limits,
    Origin, Outcome, Program, RuntimeError, Script, Span, Stmt, StmtKind,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXAMPLE_RUNTIME_LIMIT: Duration = Duration::from_secs(5);
const INDEX_ORACLE_TOL: f64 = 1e-6;
const INDEX_HAND_TOL: f64 = 1e-4;
const OBB_ORACLE_TOL: f64 = 2e-3;
const OBB_CASE_TOL: f64 = 1e-3;
const MERCATOR_TOL_DEG: f64 = 1e-9;
const AREA_REL_TOL: f64 = 1e-3;
const SUITE_LIMIT: Duration = Duration::from_secs(180);

/// Stated value for the 45° rotated unit square; see `obb` below.
const ROTATED_SQUARE_STATED: f64 = 0.2612;

const EXAMPLE_1_QUERY: &str = "Are there areas of brushwood in this uploaded image?";
const EXAMPLE_1_CODE: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
brushwood_present = 8 in segmented_mask
print(brushwood_present)
";
const EXAMPLE_2_QUERY: &str = "List agricultural areas in the uploaded image.";
const EXAMPLE_2_CODE: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
agricultural_areas = (segmented_mask == 11).sum()
print(agricultural_areas)
";

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn registry() -> Registry {
    Registry::builtin().with_mock_model_tools(MockConfig::default())
}

fn gray_png(dir: &Path, name: &str, w: u32, h: u32, level: u8) -> PathBuf {
    let p = dir.join(name);
    image::RgbImage::from_pixel(w, h, image::Rgb([level; 3]))
        .save_with_format(&p, image::ImageFormat::Png)
        .unwrap();
    p
}

fn scripted(query: &str, code: &str) -> Controller {
    let completion = format!("```python\n{code}```");
    Controller::new(LlmBackend::Scripted(ScriptedBackend::from_pairs([(query, vec![completion])])))
}

fn example_1() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let img = gray_png(dir.path(), "brushwood.png", 64, 64, 148);
    let reg = registry();
    let c = scripted(EXAMPLE_1_QUERY, EXAMPLE_1_CODE);
    let t0 = Instant::now();
    let run = || c.handle_query(&reg, EXAMPLE_1_QUERY, ToolCtx::new().with_uploads(vec![img.clone()]));
    let a = run();
    let b = run();
    let elapsed = t0.elapsed();
    ensure(a.outcome == Outcome::Success, format!("outcome {:?}", a.outcome))?;
    ensure(a.output == ["True"], format!("output {:?}", a.output))?;
    ensure(a.script == EXAMPLE_1_CODE, "recorded script differs from the emitted code")?;
    let ja = serde_json::to_vec(&a.normalized()).unwrap();
    let jb = serde_json::to_vec(&b.normalized()).unwrap();
    ensure(ja == jb, "normalized records differ between runs")?;
    ensure(elapsed < EXAMPLE_RUNTIME_LIMIT, format!("took {elapsed:?}"))?;
    Ok(format!("success, output True, records identical, {} ms for two runs", elapsed.as_millis()))
}

fn example_2() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let img = gray_png(dir.path(), "fields.png", 640, 512, 206);
    let rec = scripted(EXAMPLE_2_QUERY, EXAMPLE_2_CODE).handle_query(
        &registry(),
        EXAMPLE_2_QUERY,
        ToolCtx::new().with_uploads(vec![img]),
    );
    ensure(rec.verdict.calls_valid, "calls_valid is false")?;
    let Outcome::RuntimeError { message } = &rec.outcome else {
        return Err(format!("outcome {:?}", rec.outcome));
    };
    ensure(message.contains("CUDA out of memory"), format!("message {message}"))?;
    Ok(format!("calls_valid = true, runtime_error \"{message}\""))
}

/// Scalar formulas with the default constants inlined.
fn index_oracle(kind: IndexKind, b: &[f64]) -> Option<f64> {
    let guard = |den: f64| den.abs() >= 1e-8;
    let nd = |x: f64, y: f64| guard(x + y).then(|| (x - y) / (x + y));
    match kind {
        IndexKind::Ndvi | IndexKind::Ndwi | IndexKind::Ndsi | IndexKind::Nwi1 | IndexKind::Nwi2 => nd(b[0], b[1]),
        IndexKind::Savi => guard(b[0] + b[1] + 0.5).then(|| 1.5 * (b[0] - b[1]) / (b[0] + b[1] + 0.5)),
        IndexKind::Evi => {
            let den = b[0] + 6.0 * b[1] - 7.5 * b[2] + 1.0;
            guard(den).then(|| 2.5 * (b[0] - b[1]) / den)
        }
        IndexKind::Sr | IndexKind::Wbi => guard(b[1]).then(|| b[0] / b[1]),
    }
}

fn index_raster(kind: IndexKind, planes: Vec<Vec<f32>>) -> Raster {
    let names = kind
        .required_bands()
        .iter()
        .map(|r| if *r == "SWIR" { "SWIR1".to_string() } else { r.to_string() })
        .collect();
    let n = planes[0].len();
    let r = Raster::new(
        n,
        1,
        names,
        planes.into_iter().map(BandPlane::new).collect(),
        GeoTransform::north_up(0.0, 0.0, 1.0, -1.0),
        Crs::Wgs84,
        Some(-9999.0),
    )
    .unwrap();
    compute_index(kind, &r, &BandMap::identity().with("SWIR", "SWIR1"), &IndexParams::default()).unwrap()
}

fn indices() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for kind in IndexKind::ALL {
        let planes: Vec<Vec<f32>> = (0..kind.required_bands().len())
            .map(|_| (0..1000).map(|_| rng.random_range(0.0f32..1.0)).collect())
            .collect();
        let out = index_raster(kind, planes.clone());
        for i in 0..1000 {
            let px: Vec<f64> = planes.iter().map(|p| p[i] as f64).collect();
            let got = out.bands()[0].values()[i];
            match index_oracle(kind, &px) {
                Some(want) => worst = worst.max((got as f64 - want).abs() / want.abs().max(1.0)),
                None => ensure(out.is_nodata(got), format!("{kind} pixel {i}: expected nodata"))?,
            }
        }
    }
    ensure(worst <= INDEX_ORACLE_TOL, format!("worst error {worst:e}"))?;
    let one = |kind, px: &[f32]| index_raster(kind, px.iter().map(|v| vec![*v]).collect()).bands()[0].values()[0] as f64;
    let hand = [
        ("NDVI", one(IndexKind::Ndvi, &[0.6, 0.2]), 0.5),
        ("SAVI", one(IndexKind::Savi, &[0.6, 0.2]), 0.461_538),
        ("EVI", one(IndexKind::Evi, &[0.5, 0.1, 0.05]), 0.579_710),
    ];
    for (name, got, want) in hand {
        ensure((got - want).abs() < INDEX_HAND_TOL, format!("{name} = {got}, want {want}"))?;
    }
    Ok(format!("9 indices x 1000 pixels, worst error {worst:.1e}; NDVI 0.5, SAVI 0.4615, EVI 0.5797"))
}

/// IoU counted on an n×n grid of cell centers over the joint bounding box.
fn grid_iou(a: &ObbDetection, b: &ObbDetection, n: usize) -> f64 {
    let inside = |o: &ObbDetection, x: f64, y: f64| {
        let (s, c) = o.angle.sin_cos();
        let (dx, dy) = (x - o.cx, y - o.cy);
        (c * dx + s * dy).abs() <= o.w / 2.0 && (-s * dx + c * dy).abs() <= o.h / 2.0
    };
    let half = |o: &ObbDetection| {
        let (s, c) = o.angle.sin_cos();
        ((c.abs() * o.w + s.abs() * o.h) / 2.0, (s.abs() * o.w + c.abs() * o.h) / 2.0)
    };
    let ((ax, ay), (bx, by)) = (half(a), half(b));
    let (x0, x1) = ((a.cx - ax).min(b.cx - bx), (a.cx + ax).max(b.cx + bx));
    let (y0, y1) = ((a.cy - ay).min(b.cy - by), (a.cy + ay).max(b.cy + by));
    let (mut ia, mut ib, mut both) = (0u64, 0u64, 0u64);
    for i in 0..n {
        let y = y0 + (i as f64 + 0.5) * (y1 - y0) / n as f64;
        for j in 0..n {
            let x = x0 + (j as f64 + 0.5) * (x1 - x0) / n as f64;
            let (pa, pb) = (inside(a, x, y), inside(b, x, y));
            ia += pa as u64;
            ib += pb as u64;
            both += (pa && pb) as u64;
        }
    }
    both as f64 / (ia + ib - both) as f64
}

/// Rasterization along y: exact x-spans of each box on `rows` scanlines.
fn scanline_iou(a: &ObbDetection, b: &ObbDetection, rows: usize) -> f64 {
    let span = |o: &ObbDetection, y: f64| -> Option<(f64, f64)> {
        let (s, c) = o.angle.sin_cos();
        let dy = y - o.cy;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (k, off, half) in [(c, s * dy, o.w / 2.0), (-s, c * dy, o.h / 2.0)] {
            if k.abs() < 1e-12 {
                if off.abs() > half {
                    return None;
                }
                continue;
            }
            let (x0, x1) = ((-half - off) / k, (half - off) / k);
            lo = lo.max(x0.min(x1));
            hi = hi.min(x0.max(x1));
        }
        (lo < hi).then_some((lo + o.cx, hi + o.cx))
    };
    let r = |o: &ObbDetection| o.w.hypot(o.h) / 2.0;
    let (y0, y1) = ((a.cy - r(a)).min(b.cy - r(b)), (a.cy + r(a)).max(b.cy + r(b)));
    let dy = (y1 - y0) / rows as f64;
    let (mut ia, mut ib, mut both) = (0.0, 0.0, 0.0);
    for i in 0..rows {
        let y = y0 + (i as f64 + 0.5) * dy;
        let (sa, sb) = (span(a, y), span(b, y));
        if let Some((l, h)) = sa {
            ia += h - l;
        }
        if let Some((l, h)) = sb {
            ib += h - l;
        }
        if let (Some((la, ha)), Some((lb, hb))) = (sa, sb) {
            both += (ha.min(hb) - la.max(lb)).max(0.0);
        }
    }
    both / (ia + ib - both)
}

struct ObbOutcome {
    detail: Vec<String>,
    failed: Vec<&'static str>,
}

fn obb() -> ObbOutcome {
    let mut detail = Vec::new();
    let mut failed = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut bx = || {
            ObbDetection::new(
                rng.random_range(0.0..6.0),
                rng.random_range(0.0..6.0),
                rng.random_range(1.0..8.0),
                rng.random_range(1.0..8.0),
                rng.random_range(-3.2..3.2),
                0,
            )
        };
        let (a, b) = (bx(), bx());
        worst = worst.max((obb_iou(&a, &b).unwrap() - scanline_iou(&a, &b, 4000)).abs());
    }
    if worst > OBB_ORACLE_TOL {
        failed.push("random pairs");
    }
    detail.push(format!("500 pairs worst |err| {worst:.1e}"));

    let unit = ObbDetection::new(0.0, 0.0, 1.0, 1.0, 0.0, 0);
    let shifted = ObbDetection::new(0.5, 0.0, 1.0, 1.0, 0.0, 0);
    let third = obb_iou(&unit, &shifted).unwrap();
    let third_oracle = grid_iou(&unit, &shifted, 3000);
    if (third - 1.0 / 3.0).abs() > OBB_CASE_TOL || (third_oracle - 1.0 / 3.0).abs() > OBB_CASE_TOL {
        failed.push("offset squares");
    }
    detail.push(format!("offset squares {third:.4} (oracle {third_oracle:.4})"));

    let rotated = ObbDetection::new(0.0, 0.0, 1.0, 1.0, std::f64::consts::FRAC_PI_4, 0);
    let got = obb_iou(&unit, &rotated).unwrap();
    let oracle = grid_iou(&unit, &rotated, 3000);
    if (got - ROTATED_SQUARE_STATED).abs() > OBB_CASE_TOL {
        failed.push("rotated square");
    }
    detail.push(format!(
        "45deg square {got:.4} (oracle {oracle:.4}, stated {ROTATED_SQUARE_STATED}; octagon 2(sqrt2-1) gives sqrt2/2)"
    ));

    let bx = |cx: f64| ObbDetection::new(cx, 0.0, 2.0, 2.0, 0.0, 1);
    let m = map50(&[bx(0.0).with_score(0.9), bx(50.0).with_score(0.8)], &[bx(0.0), bx(10.0)]).unwrap();
    if m != Some(0.5) {
        failed.push("map50 fixture");
    }
    detail.push(format!("map50 fixture {m:?}"));
    ObbOutcome { detail, failed }
}

fn ident(rng: &mut ChaCha8Rng) -> String {
    loop {
        let len = rng.random_range(1..6);
        let s: String = (0..len)
            .map(|i| {
                let set: &[u8] = if i == 0 { b"abcxyz_" } else { b"abcxyz_019" };
                *set.choose(rng).unwrap() as char
            })
            .collect();
        if !geoscript_core::script::is_reserved(&s) {
            return s;
        }
    }
}

const OPS: [BinOp; 11] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::In,
];

fn fuzz_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let pick = if depth == 0 { rng.random_range(0..5) } else { rng.random_range(0..11) };
    let kind = match pick {
        0 => ExprKind::Ident(ident(rng)),
        1 => ExprKind::Int(rng.random_range(0..=i64::MAX)),
        2 => ExprKind::Float(f64::from_bits(rng.random_range(0..0x7FF0_0000_0000_0000u64))),
        3 => ExprKind::Str(
            (0..rng.random_range(0..6))
                .map(|_| *['a', ' ', '"', '\\', '\n', '\t', 'é', '0'].choose(rng).unwrap())
                .collect(),
        ),
        4 => ExprKind::Bool(rng.random_bool(0.5)),
        5 => ExprKind::List((0..rng.random_range(0..4)).map(|_| fuzz_expr(rng, depth - 1)).collect()),
        6 => ExprKind::Call {
            callee: Box::new(fuzz_expr(rng, depth - 1)),
            args: (0..rng.random_range(0..3)).map(|_| fuzz_expr(rng, depth - 1)).collect(),
        },
        7 => ExprKind::Method {
            receiver: Box::new(fuzz_expr(rng, depth - 1)),
            name: ident(rng),
            args: (0..rng.random_range(0..3)).map(|_| fuzz_expr(rng, depth - 1)).collect(),
        },
        8 => ExprKind::Index {
            target: Box::new(fuzz_expr(rng, depth - 1)),
            index: Box::new(fuzz_expr(rng, depth - 1)),
        },
        9 => ExprKind::Binary {
            op: *OPS.choose(rng).unwrap(),
            lhs: Box::new(fuzz_expr(rng, depth - 1)),
            rhs: Box::new(fuzz_expr(rng, depth - 1)),
        },
        _ => ExprKind::Neg(Box::new(fuzz_expr(rng, depth - 1))),
    };
    Expr::bare(kind)
}

fn fuzz_program(rng: &mut ChaCha8Rng) -> Program {
    let stmts = (0..rng.random_range(0..5))
        .map(|_| {
            let kind = if rng.random_bool(0.5) {
                StmtKind::Assign {
                    target: ident(rng),
                    value: fuzz_expr(rng, 4),
                }
            } else {
                StmtKind::Expr(fuzz_expr(rng, 4))
            };
            Stmt {
                kind,
                span: Span::default(),
            }
        })
        .collect();
    Program { stmts }
}

/// Straight-line programs over registry names, builtins and unbound names.
fn random_source(rng: &mut ChaCha8Rng, reg: &Registry) -> String {
    let mut callees: Vec<String> = reg.names().map(String::from).collect();
    callees.extend(["print", "len", "round", "frobnicate", "nope"].map(String::from));
    let mut vars: Vec<String> = Vec::new();
    let mut lines = Vec::new();
    for i in 0..rng.random_range(1..5) {
        let mut e = match rng.random_range(0..4) {
            0 => rng.random_range(-3i64..20).to_string(),
            1 => vars.choose(rng).cloned().unwrap_or_else(|| "ghost".into()),
            2 => "\"RED\"".into(),
            _ => {
                let arg = vars.choose(rng).cloned().unwrap_or_else(|| "1".into());
                format!("{}({arg})", callees.choose(rng).unwrap())
            }
        };
        if rng.random_bool(0.3) {
            e = format!("print({e})");
        }
        let v = format!("v{i}");
        lines.push(format!("{v} = {e}"));
        vars.push(v);
    }
    lines.join("\n") + "\n"
}

fn limit_hit(src: &str, reg: &Registry, mut ctx: ToolCtx, limits: Limits) -> Option<LimitKind> {
    let p = parse_program(src).ok()?;
    match execute(&p, reg, &mut ctx, &limits).result {
        Err(e) => match e.error {
            RuntimeError::ResourceLimit { which, .. } => Some(which),
            _ => None,
        },
        Ok(()) => None,
    }
}

fn interpreter() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let p = fuzz_program(&mut rng);
        let src = print_program(&p);
        let back = parse_program(&src).map_err(|e| format!("case {i}: {e}\n{src}"))?;
        ensure(back == p, format!("case {i}: round trip changed the tree\n{src}"))?;
    }

    let reg = registry();
    let mut validated = 0;
    for _ in 0..300 {
        let src = random_source(&mut rng, &reg);
        let p = parse_program(&src).map_err(|e| format!("{e}\n{src}"))?;
        if !validate_calls(&p, &reg).calls_valid {
            continue;
        }
        validated += 1;
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = ToolCtx::new().with_artifacts_dir(dir.path());
        if let Err(e) = execute(&p, &reg, &mut ctx, &Limits::default()).result {
            let unknown = matches!(e.error, RuntimeError::NameError(_) | RuntimeError::Tool(ToolError::UnknownTool(_)));
            ensure(!unknown, format!("validated program hit {e}\n{src}"))?;
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let img = gray_png(dir.path(), "g.png", 8, 8, 148);
    let tight = Limits {
        max_steps: 10_000,
        max_wall_ms: 60_000,
        max_value_bytes: 1 << 20,
        max_tool_calls: 3,
    };
    let slow = Registry::builtin().with_mock_model_tools(MockConfig {
        gpu_memory_mib: None,
        delay: Duration::from_millis(150),
    });
    let uploads = || ToolCtx::new().with_uploads(vec![img.clone()]);
    let cases = [
        ("x = [0] * 20000", &reg, ToolCtx::new(), tight, LimitKind::Steps),
        ("x = \"abcdefgh\" * 1000000", &reg, ToolCtx::new(), tight, LimitKind::ValueStore),
        (
            "p = [get_uploaded_image_path(), get_uploaded_image_path(), get_uploaded_image_path(), get_uploaded_image_path()]",
            &reg,
            uploads(),
            tight,
            LimitKind::ToolCalls,
        ),
        (
            "m = dofa_segmentation_tool(get_uploaded_image_path())",
            &slow,
            uploads(),
            Limits { max_wall_ms: 50, ..tight },
            LimitKind::WallClock,
        ),
    ];
    for (src, r, ctx, limits, want) in cases {
        let got = limit_hit(src, r, ctx, limits);
        ensure(got == Some(want), format!("{src}: expected {want:?}, got {got:?}"))?;
    }

    for src in [EXAMPLE_1_CODE, EXAMPLE_2_CODE] {
        let p = parse_program(src).map_err(|e| e.to_string())?;
        ensure(validate_calls(&p, &reg).calls_valid, format!("excerpt does not validate:\n{src}"))?;
    }
    Ok(format!(
        "1000 fuzzed trees round trip; {validated} validated random programs, no unknown names; 4 limits trigger; excerpts parse"
    ))
}

fn llm_level() -> Check {
    let reg = Registry::builtin();
    let run = |src: String| execute_script(&Script::new(src, Origin::Fixture), &reg, &mut ToolCtx::new(), &Limits::default());
    let mut runs = Vec::new();
    runs.extend((0..80).map(|i| run(format!("print({i})"))));
    runs.extend((0..7).map(|i| run(format!("print({i} / 0)"))));
    runs.extend((0..13).map(|i| run(format!("print(no_such_tool({i}))"))));
    let l = eval_llm_level(&runs).map_err(|e| e.to_string())?;
    ensure(l.runs == 100, format!("{} runs", l.runs))?;
    ensure(l.code_validity_rate == 0.87, format!("validity {}", l.code_validity_rate))?;
    ensure(l.execution_success_rate == 0.80, format!("success {}", l.execution_success_rate))?;
    Ok("validity 0.87, execution success 0.80".into())
}

fn random_raster(rng: &mut ChaCha8Rng, any_bits: bool) -> Raster {
    let (w, h, nb) = (rng.random_range(1..10), rng.random_range(1..10), rng.random_range(1..4));
    let planes = (0..nb)
        .map(|_| {
            BandPlane::new(
                (0..w * h)
                    .map(|_| {
                        if any_bits {
                            f32::from_bits(rng.random())
                        } else {
                            rng.random_range(-100.0f32..100.0)
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Raster::new(
        w,
        h,
        CANONICAL_BANDS[..nb].iter().map(|s| s.to_string()).collect(),
        planes,
        GeoTransform::north_up(
            rng.random_range(-1000.0..1000.0),
            rng.random_range(-1000.0..1000.0),
            rng.random_range(0.001..10.0),
            -rng.random_range(0.001..10.0),
        ),
        if rng.random_bool(0.5) { Crs::Wgs84 } else { Crs::WebMercator },
        rng.random_bool(0.5).then_some(-9999.0),
    )
    .unwrap()
}

fn same_bits(a: &Raster, b: &Raster) -> bool {
    a.width() == b.width()
        && a.height() == b.height()
        && a.band_names() == b.band_names()
        && a.geotransform() == b.geotransform()
        && a.crs() == b.crs()
        && a.nodata().map(f32::to_bits) == b.nodata().map(f32::to_bits)
        && a.bands().len() == b.bands().len()
        && a.bands().iter().zip(b.bands()).all(|(x, y)| {
            x.values().iter().map(|v| v.to_bits()).eq(y.values().iter().map(|v| v.to_bits()))
        })
}

/// Midpoint-rule integral of R² cos φ over a lon/lat cell.
fn integrated_cell_area(lat0: f64, lat1: f64, dlon_deg: f64, steps: usize) -> f64 {
    let h = (lat1 - lat0).to_radians() / steps as f64;
    let s: f64 = (0..steps).map(|i| (lat0.to_radians() + (i as f64 + 0.5) * h).cos()).sum();
    AUTHALIC_RADIUS_M * AUTHALIC_RADIUS_M * dlon_deg.to_radians() * s * h
}

fn geo() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4326);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (lon, lat) = (rng.random_range(-180.0..180.0), rng.random_range(-85.0..85.0));
        let (x, y) = lonlat_to_mercator(lon, lat).map_err(|e| e.to_string())?;
        let (lon2, lat2) = mercator_to_lonlat(x, y);
        worst = worst.max((lon - lon2).abs()).max((lat - lat2).abs());
    }
    ensure(worst <= MERCATOR_TOL_DEG, format!("mercator round trip {worst:e} deg"))?;

    let m = Mask::from_bools(1, 1, vec![true]).unwrap();
    let area = mask_area_m2(&m, &GeoTransform::north_up(0.0, 1.0, 1.0, -1.0), Crs::Wgs84, 1).map_err(|e| e.to_string())?;
    let oracle = integrated_cell_area(0.0, 1.0, 1.0, 100_000);
    ensure((area - oracle).abs() / oracle <= AREA_REL_TOL, format!("area {area} vs oracle {oracle}"))?;
    ensure((area - 1.2364e10).abs() / 1.2364e10 <= AREA_REL_TOL, format!("area {area} vs 1.2364e10"))?;

    for _ in 0..100 {
        let r = random_raster(&mut rng, true);
        let (tw, th) = (rng.random_range(1..5), rng.random_range(1..5));
        let back = make_tiles(&r, tw, th).map_err(|e| e.to_string())?.assemble().map_err(|e| e.to_string())?;
        ensure(same_bits(&back, &r), "tile reassembly is not bit-exact")?;
        let r = random_raster(&mut rng, false);
        let once = mosaic(std::slice::from_ref(&r)).map_err(|e| e.to_string())?;
        let twice = mosaic(&[r.clone(), r.clone()]).map_err(|e| e.to_string())?;
        ensure(same_bits(&once, &r) && same_bits(&twice, &r), "mosaic is not idempotent")?;
    }
    Ok(format!(
        "mercator worst {worst:.1e} deg; 1x1 deg equator cell {area:.5e} m2 (oracle {oracle:.5e}); 100 tilings and mosaics exact"
    ))
}

fn raster_format() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let r = random_raster(&mut rng, true);
        let p = dir.path().join(format!("r{i}.json"));
        save_raster(&r, &p).map_err(|e| e.to_string())?;
        let back = load_raster(&p).map_err(|e| e.to_string())?;
        ensure(same_bits(&back, &r), format!("case {i} differs after save/load"))?;
    }
    Ok("200 random rasters, arbitrary f32 bit patterns, bit-exact".into())
}

fn cli_suite(suite_start: Instant) -> Check {
    let ws = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let members: Vec<String> = std::fs::read_dir(ws.join("crates"))
        .unwrap()
        .flatten()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ensure(
        members.iter().all(|m| m == "core" || m == "service"),
        format!("unexpected workspace members {members:?}"),
    )?;
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_geoscript");
    let run = |args: &[&str]| -> Result<String, String> {
        let o = Command::new(bin)
            .args(args)
            .current_dir(dir.path())
            .env_remove("GEOSCRIPT_REGISTRY_DIR")
            .env_remove("GEOSCRIPT_BACKEND")
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("geoscript {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)));
        }
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    };
    run(&["fixtures", "--out", "fx"])?;
    let report = run(&[
        "eval",
        "final",
        "--dataset",
        "fx/datasets/land_cover.jsonl",
        "--dataset",
        "fx/datasets/wildfire_burn.jsonl",
        "--dataset",
        "fx/datasets/wildfire_objects.jsonl",
        "--runs-out",
        "runs",
    ])?;
    ensure(report.contains("Final answers"), "no final-answer table")?;
    for task in ["cls", "seg", "det", "burn"] {
        let pred = format!("fx/tool_level/{task}_pred.json");
        let truth = format!("fx/tool_level/{task}_truth.json");
        run(&["eval", "tools", "--task", task, "--pred", &pred, "--truth", &truth])?;
    }
    run(&["eval", "llm", "--runs", "runs"])?;
    let total = suite_start.elapsed();
    ensure(total < SUITE_LIMIT, format!("suite took {total:?}"))?;
    Ok(format!(
        "workspace has no UI crate; fixtures, final/tool/LLM evaluations via the CLI; suite total {:.1} s",
        total.as_secs_f64()
    ))
}

fn line(ok: bool, name: &str, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() {
    let start = Instant::now();
    let mut unexpected: Vec<&str> = Vec::new();
    let mut report = |name: &'static str, r: Check| match r {
        Ok(d) => line(true, name, &d),
        Err(e) => {
            line(false, name, &e);
            unexpected.push(name);
        }
    };
    report("example 1 brushwood end to end", example_1());
    report("example 2 out-of-memory end to end", example_2());
    report("spectral index oracle suite", indices());

    // known red: the stated ≈0.2612 for the 45° square contradicts its own
    // octagon derivation, which gives √2/2; every other part must pass
    let o = obb();
    let obb_name = "obb_iou vs rasterization oracle";
    line(o.failed.is_empty(), obb_name, &o.detail.join("; "));
    let obb_as_expected = o.failed == ["rotated square"];

    report("interpreter property suite", interpreter());
    report("llm-level rates on 100-run fixture", llm_level());
    report("geo ops", geo());
    report("raster format round trip", raster_format());
    report("full suite via CLI under 3 min", cli_suite(start));
    if !obb_as_expected {
        unexpected.push(obb_name);
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance results: {unexpected:?}");
        std::process::exit(1);
    }
}
