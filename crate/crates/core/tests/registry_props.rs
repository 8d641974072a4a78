use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use geoscript_core::eval::ObbDetection;
use geoscript_core::raster::{BandPlane, Crs, GeoTransform, Mask, MaskValues, Raster};
use geoscript_core::registry::{
    render_prompt_catalog, Binding, CallStatus, MockConfig, Registry, ToolCategory, ToolCtx, ToolError, ToolSpec,
};
use geoscript_core::Value;
use proptest::prelude::*;

fn arb_raster() -> impl Strategy<Value = Raster> {
    (1usize..4, 1usize..4).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<f32>(), w * h).prop_map(move |v| {
            Raster::new(
                w,
                h,
                vec!["NIR".into()],
                vec![BandPlane::new(v)],
                GeoTransform::north_up(2.5, 48.0, 0.001, -0.001),
                Crs::Wgs84,
                None,
            )
            .unwrap()
        })
    })
}

fn arb_mask() -> impl Strategy<Value = Mask> {
    (1usize..4, 1usize..4, any::<bool>()).prop_flat_map(|(w, h, boolean)| {
        proptest::collection::vec(0u32..14, w * h).prop_map(move |v| {
            let (values, legend) = if boolean {
                (MaskValues::Bool(v.iter().map(|c| c % 2 == 1).collect()), None)
            } else {
                (MaskValues::Class(v), Some((0..14).map(|c| (c, format!("class {c}"))).collect::<BTreeMap<_, _>>()))
            };
            Mask::new(w, h, values, legend).unwrap()
        })
    })
}

fn arb_detection() -> impl Strategy<Value = ObbDetection> {
    (0.0f64..100.0, 0.0f64..100.0, 0.1f64..20.0, 0.1f64..20.0, -1.5f64..1.5, 0u32..10, proptest::option::of(0.0f64..1.0))
        .prop_map(|(cx, cy, w, h, a, c, s)| {
            let d = ObbDetection::new(cx, cy, w, h, a, c);
            match s {
                Some(s) => d.with_score(s),
                None => d,
            }
        })
}

fn arb_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::None),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(Value::Float),
        ".{0,12}".prop_map(Value::Str),
        arb_raster().prop_map(|r| Value::Raster(Arc::new(r))),
        arb_mask().prop_map(|m| Value::Mask(Arc::new(m))),
        proptest::collection::vec(arb_detection(), 0..4).prop_map(|d| Value::Detections(Arc::new(d))),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| proptest::collection::vec(inner, 0..4).prop_map(Value::List))
}

proptest! {
    #[test]
    fn wire_round_trip(v in arb_value()) {
        let dir = tempfile::tempdir().unwrap();
        let wire = v.to_wire(dir.path()).unwrap();
        let text = serde_json::to_string(&wire).unwrap();
        let back = Value::from_wire(&serde_json::from_str(&text).unwrap(), dir.path()).unwrap();
        match (&v, &back) {
            // -0.0 == 0.0, so compare floats bit for bit
            (Value::Float(a), Value::Float(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            _ => prop_assert_eq!(&back, &v),
        }
    }
}

fn registry() -> Registry {
    Registry::builtin().with_mock_model_tools(MockConfig::default())
}

fn arb_arg() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::None),
        (-5i64..5).prop_map(Value::Int),
        (0.0f64..2.0).prop_map(Value::Float),
        prop_oneof![Just("RED"), Just("ndvi"), Just("x"), Just("EPSG:3857")].prop_map(|s| Value::Str(s.into())),
        arb_raster().prop_map(|r| Value::Raster(Arc::new(r))),
        arb_mask().prop_map(|m| Value::Mask(Arc::new(m))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn one_record_per_invoke(
        calls in proptest::collection::vec((any::<prop::sample::Index>(), proptest::collection::vec(arb_arg(), 0..4)), 1..12)
    ) {
        let reg = registry();
        let mut names: Vec<String> = reg.names().map(String::from).collect();
        names.push("not_a_tool".into());
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = ToolCtx::new().with_artifacts_dir(dir.path());
        for (i, (pick, args)) in calls.iter().enumerate() {
            let name = &names[pick.index(names.len())];
            let result = reg.invoke(&mut ctx, name, args);
            prop_assert_eq!(ctx.calls.len(), i + 1);
            let rec = &ctx.calls[i];
            prop_assert_eq!(&rec.tool, name);
            prop_assert_eq!(rec.status == CallStatus::Ok, result.is_ok());
            prop_assert_eq!(rec.error.is_some(), result.is_err());
            if let Err(ToolError::UnknownTool(n)) = &result {
                prop_assert!(!reg.contains(n));
            }
        }
    }
}

fn external(name: &str, script: &str, timeout_s: f64) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        category: ToolCategory::Data,
        general_description: format!("{name} test double"),
        technical_description: "shell script".into(),
        supported_sensors: None,
        usage_example: None,
        training_datasets: None,
        args: None,
        returns: None,
        binding: Binding::External {
            cmd: vec!["sh".into(), "-c".into(), script.into()],
            timeout_s,
            resources: None,
        },
    }
}

#[test]
fn external_calls_are_recorded_once_whatever_happens() {
    let mut reg = Registry::builtin();
    reg.register_external(external("ok_tool", "cat >/dev/null; echo '{\"status\":\"ok\",\"value\":{\"type\":\"int\",\"value\":3}}'", 5.0))
        .unwrap();
    reg.register_external(external("err_tool", "cat >/dev/null; echo '{\"status\":\"error\",\"message\":\"CUDA out of memory\"}'", 5.0))
        .unwrap();
    reg.register_external(external("crash_tool", "echo boom >&2; exit 3", 5.0)).unwrap();
    reg.register_external(external("slow_tool", "sleep 5", 0.2)).unwrap();
    reg.register_external(external("garbage_tool", "echo not json", 5.0)).unwrap();

    let mut ctx = ToolCtx::new();
    assert_eq!(reg.invoke(&mut ctx, "ok_tool", &[Value::Int(1)]).unwrap(), Value::Int(3));
    let e = reg.invoke(&mut ctx, "err_tool", &[]).unwrap_err();
    assert_eq!(e.to_string(), "CUDA out of memory");
    let e = reg.invoke(&mut ctx, "crash_tool", &[]).unwrap_err();
    assert!(matches!(&e, ToolError::ToolCrashed { stderr, .. } if stderr.contains("boom")), "{e:?}");
    let e = reg.invoke(&mut ctx, "slow_tool", &[]).unwrap_err();
    assert!(matches!(e, ToolError::ToolTimeout { .. }), "{e:?}");
    let e = reg.invoke(&mut ctx, "garbage_tool", &[]).unwrap_err();
    assert!(matches!(e, ToolError::MalformedToolOutput { .. }), "{e:?}");

    let tools: Vec<&str> = ctx.calls.iter().map(|c| c.tool.as_str()).collect();
    assert_eq!(tools, ["ok_tool", "err_tool", "crash_tool", "slow_tool", "garbage_tool"]);
    assert_eq!(ctx.calls[0].status, CallStatus::Ok);
    assert!(ctx.calls[1..].iter().all(|c| c.status == CallStatus::Error));
}

fn write_manifests(dir: &Path, order: &[usize]) {
    let specs = [
        external("zeta_tool", "true", 1.0),
        external("alpha_tool", "true", 1.0),
        external("mid_tool", "true", 2.0),
    ];
    for &i in order {
        let path = dir.join(format!("{}.json", specs[i].name));
        std::fs::write(&path, serde_json::to_string_pretty(&specs[i]).unwrap()).unwrap();
    }
}

#[test]
fn catalog_is_deterministic_and_closed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_manifests(a.path(), &[0, 1, 2]);
    write_manifests(b.path(), &[2, 0, 1]);
    let ra = Registry::load(a.path()).unwrap().with_mock_model_tools(MockConfig::default());
    let rb = Registry::load(b.path()).unwrap().with_mock_model_tools(MockConfig::default());
    let ca = render_prompt_catalog(&ra);
    assert_eq!(ca, render_prompt_catalog(&rb));
    assert_eq!(ca, render_prompt_catalog(&ra));

    // the catalog lists exactly the registered tools, in name order
    let listed: Vec<String> = ca
        .lines()
        .filter_map(|l| l.strip_prefix("### "))
        .map(|l| l.split(' ').next().unwrap().to_string())
        .collect();
    let names: Vec<String> = ra.names().map(String::from).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(listed, sorted);
    assert_eq!(names, sorted);
    for n in ["alpha_tool", "mid_tool", "zeta_tool", "dofa_segmentation_tool", "ndvi", "get_uploaded_image_path"] {
        assert!(ra.contains(n), "{n}");
    }
}

#[test]
fn duplicate_manifest_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_manifests(dir.path(), &[0]);
    std::fs::write(
        dir.path().join("copy.json"),
        serde_json::to_string(&external("zeta_tool", "true", 1.0)).unwrap(),
    )
    .unwrap();
    assert!(Registry::load(dir.path()).is_err());
}
