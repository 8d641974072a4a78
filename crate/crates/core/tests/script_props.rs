use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use geoscript_core::registry::{MockConfig, Registry, ToolCtx, ToolError};
use geoscript_core::script::{
    execute, execute_script, parse_program, print_program, validate_calls, BinOp, Expr, ExprKind, LimitKind, Limits,
    Origin, Outcome, Program, RuntimeError, Script, Stmt, StmtKind, Span,
};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}".prop_filter("keyword", |s| !geoscript_core::script::is_reserved(s))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        ident().prop_map(ExprKind::Ident),
        (0..=i64::MAX).prop_map(ExprKind::Int),
        any::<f64>()
            .prop_filter("finite, positive sign", |v| v.is_finite() && v.is_sign_positive())
            .prop_map(ExprKind::Float),
        "[a-zA-Z0-9 \"\\\\\n\t\r\0é∂]{0,8}".prop_map(ExprKind::Str),
        any::<bool>().prop_map(ExprKind::Bool),
    ]
    .prop_map(Expr::bare)
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(ExprKind::List),
            (inner.clone(), proptest::collection::vec(inner.clone(), 0..3))
                .prop_map(|(c, args)| ExprKind::Call { callee: Box::new(c), args }),
            (inner.clone(), ident(), proptest::collection::vec(inner.clone(), 0..3))
                .prop_map(|(r, name, args)| ExprKind::Method { receiver: Box::new(r), name, args }),
            (inner.clone(), inner.clone())
                .prop_map(|(t, i)| ExprKind::Index { target: Box::new(t), index: Box::new(i) }),
            (0..OPS.len(), inner.clone(), inner.clone())
                .prop_map(|(o, l, r)| ExprKind::Binary { op: OPS[o], lhs: Box::new(l), rhs: Box::new(r) }),
            inner.prop_map(|e| ExprKind::Neg(Box::new(e))),
        ]
        .prop_map(Expr::bare)
    })
}

fn arb_program() -> impl Strategy<Value = Program> {
    let stmt = prop_oneof![
        (ident(), arb_expr()).prop_map(|(target, value)| StmtKind::Assign { target, value }),
        arb_expr().prop_map(StmtKind::Expr),
    ]
    .prop_map(|kind| Stmt { kind, span: Span::default() });
    proptest::collection::vec(stmt, 0..5).prop_map(|stmts| Program { stmts })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_then_parse_is_identity(p in arb_program()) {
        let src = print_program(&p);
        let back = parse_program(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(print_program(&back), src);
    }
}

/// Random straight-line programs over real tool names, builtins and a few
/// names that resolve to nothing.
fn gen_program(seed: u64, reg: &Registry) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut callees: Vec<String> = reg.names().map(String::from).collect();
    callees.extend(["print", "len", "abs", "round", "frobnicate", "nope"].map(String::from));
    let methods = ["sum", "mean", "count", "min", "max", "upper"];
    let mut vars: Vec<String> = Vec::new();
    let mut lines = Vec::new();
    fn expr(rng: &mut ChaCha8Rng, depth: u32, vars: &[String], callees: &[String], methods: &[&str]) -> String {
        let pick = if depth == 0 { rng.random_range(0..3) } else { rng.random_range(0..7) };
        match pick {
            0 => rng.random_range(-3i64..20).to_string(),
            1 => ["\"a\"", "\"x_1\"", "\"NDVI\"", "\"RED\""].choose(rng).unwrap().to_string(),
            2 => match vars.choose(rng) {
                Some(v) if rng.random_bool(0.9) => v.clone(),
                _ => "ghost".to_string(),
            },
            3 | 4 => {
                let name = callees.choose(rng).unwrap();
                let n = rng.random_range(0..4);
                let args: Vec<String> = (0..n).map(|_| expr(rng, depth - 1, vars, callees, methods)).collect();
                format!("{name}({})", args.join(", "))
            }
            5 => {
                let items: Vec<String> = (0..rng.random_range(0..4))
                    .map(|_| expr(rng, depth - 1, vars, callees, methods))
                    .collect();
                format!("[{}]", items.join(", "))
            }
            _ => {
                let recv = expr(rng, depth - 1, vars, callees, methods);
                let m = methods.choose(rng).unwrap();
                let arg = if *m == "count" { "1" } else { "" };
                format!("({recv}).{m}({arg})")
            }
        }
    }
    for i in 0..rng.random_range(1..6) {
        let e = expr(&mut rng, 3, &vars, &callees, &methods);
        if rng.random_bool(0.5) {
            let v = format!("v{i}");
            lines.push(format!("{v} = {e}"));
            vars.push(v);
        } else {
            lines.push(e);
        }
    }
    lines.join("\n") + "\n"
}

fn registry() -> Registry {
    Registry::builtin().with_mock_model_tools(MockConfig::default())
}

fn ctx(artifacts: &Path) -> ToolCtx {
    ToolCtx::new().with_artifacts_dir(artifacts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn validated_programs_never_hit_unknown_names(seed in any::<u64>()) {
        let reg = registry();
        let src = gen_program(seed, &reg);
        let prog = parse_program(&src).unwrap();
        let verdict = validate_calls(&prog, &reg);
        if verdict.calls_valid {
            let dir = tempfile::tempdir().unwrap();
            let run = execute(&prog, &reg, &mut ctx(dir.path()), &Limits::default());
            if let Err(e) = run.result {
                prop_assert!(
                    !matches!(e.error, RuntimeError::NameError(_) | RuntimeError::Tool(ToolError::UnknownTool(_))),
                    "{}\n{}", src, e
                );
            }
        }
    }

    #[test]
    fn effects_are_logged_calls_or_printed_lines(seed in any::<u64>()) {
        let reg = registry();
        let src = gen_program(seed, &reg);
        let dir = tempfile::tempdir().unwrap();
        let mut c = ctx(&dir.path().join("artifacts"));
        let rec = execute_script(&Script::new(src.clone(), Origin::Fixture), &reg, &mut c, &Limits::default());
        prop_assert_eq!(rec.tool_calls.len() as u64, rec.usage.tool_calls as u64);
        if !src.contains("print(") {
            prop_assert!(rec.output.is_empty());
        }
        if !rec.verdict.calls_valid {
            prop_assert!(rec.tool_calls.is_empty() && rec.output.is_empty());
        }
        // files on disk are exactly the artifacts recorded by logged calls
        let listed: BTreeSet<PathBuf> = c.artifacts.iter().cloned().collect();
        let saves = rec.tool_calls.iter().filter(|t| t.tool == "save_artifact").count();
        prop_assert!(listed.len() <= saves);
        let mut on_disk = BTreeSet::new();
        for entry in walk(dir.path()) {
            on_disk.insert(entry);
        }
        for f in &on_disk {
            let stem = f.with_extension("json");
            prop_assert!(listed.contains(f) || listed.contains(&stem), "unlogged file {}", f.display());
        }
    }

    #[test]
    fn normalized_records_are_deterministic(seed in any::<u64>()) {
        let reg = registry();
        let src = gen_program(seed, &reg);
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            execute_script(&Script::new(src.clone(), Origin::Fixture), &reg, &mut ctx(dir.path()), &Limits::default())
                .normalized()
        };
        prop_assert_eq!(run(), run());
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
    }
    out
}

#[test]
fn reserved_words_never_reach_execution() {
    for src in ["open(\"x\")", "exec(\"1\")", "__import__(\"os\")", "import os", "eval(\"1\")"] {
        let rec = execute_script(
            &Script::new(src, Origin::Fixture),
            &registry(),
            &mut ToolCtx::new(),
            &Limits::default(),
        );
        assert!(!rec.verdict.syntactically_valid, "{src}");
        assert_eq!(rec.outcome, Outcome::ValidationFailure);
    }
}

fn limit_hit(src: &str, reg: &Registry, mut c: ToolCtx, limits: Limits) -> Option<LimitKind> {
    let prog = parse_program(src).unwrap();
    assert!(validate_calls(&prog, reg).calls_valid, "{src}");
    match execute(&prog, reg, &mut c, &limits).result {
        Err(e) => match e.error {
            RuntimeError::ResourceLimit { which, .. } => Some(which),
            other => panic!("{src}: unexpected {other}"),
        },
        Ok(()) => None,
    }
}

fn gray_png(dir: &Path) -> PathBuf {
    let path = dir.join("gray.png");
    image::RgbImage::from_pixel(8, 8, image::Rgb([148, 148, 148])).save(&path).unwrap();
    path
}

#[test]
fn each_limit_triggers_on_its_program() {
    let reg = registry();
    let dir = tempfile::tempdir().unwrap();
    let img = gray_png(dir.path());
    let tight = Limits {
        max_steps: 10_000,
        max_wall_ms: 60_000,
        max_value_bytes: 1 << 20,
        max_tool_calls: 3,
    };

    assert_eq!(limit_hit("x = [0] * 20000", &reg, ToolCtx::new(), tight), Some(LimitKind::Steps));
    assert_eq!(
        limit_hit("x = \"abcdefgh\" * 1000000", &reg, ToolCtx::new(), tight),
        Some(LimitKind::ValueStore)
    );
    assert_eq!(
        limit_hit(
            "p = get_uploaded_image_path()\nq = [get_uploaded_image_path(), get_uploaded_image_path(), get_uploaded_image_path()]",
            &reg,
            ToolCtx::new().with_uploads(vec![img.clone()]),
            tight
        ),
        Some(LimitKind::ToolCalls)
    );

    let slow = Registry::builtin().with_mock_model_tools(MockConfig {
        gpu_memory_mib: None,
        delay: Duration::from_millis(150),
    });
    let wall = Limits { max_wall_ms: 50, ..tight };
    assert_eq!(
        limit_hit(
            "m = dofa_segmentation_tool(get_uploaded_image_path())\nprint(8 in m)",
            &slow,
            ToolCtx::new().with_uploads(vec![img.clone()]),
            wall
        ),
        Some(LimitKind::WallClock)
    );

    // each of these stays within the same limits when the crafted excess is removed
    assert_eq!(limit_hit("x = [0] * 2000", &reg, ToolCtx::new(), tight), None);
    assert_eq!(limit_hit("x = \"abcdefgh\" * 1000", &reg, ToolCtx::new(), tight), None);
    assert_eq!(
        limit_hit("p = get_uploaded_image_path()", &reg, ToolCtx::new().with_uploads(vec![img.clone()]), tight),
        None
    );
}

const FIG2_EXAMPLE_1: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
brushwood_present = 8 in segmented_mask
print(brushwood_present)
";

const FIG2_EXAMPLE_2: &str = "uploaded_image_path = get_uploaded_image_path()
segmented_mask = dofa_segmentation_tool(uploaded_image_path)
agricultural_areas = (segmented_mask == 11).sum()
print(agricultural_areas)
";

#[test]
fn worked_examples_parse_and_validate() {
    let reg = registry();
    for src in [FIG2_EXAMPLE_1, FIG2_EXAMPLE_2] {
        let p = parse_program(src).unwrap();
        assert_eq!(p.stmts.len(), 4);
        assert!(p.stmts[..3].iter().all(|s| matches!(s.kind, StmtKind::Assign { .. })));
        assert!(matches!(&p.stmts[3].kind, StmtKind::Expr(Expr { kind: ExprKind::Call { .. }, .. })));
        assert!(validate_calls(&p, &reg).calls_valid);
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }
}
