use geoscript_core::raster::{
    load_raster, save_raster, BandPlane, Crs, GeoTransform, Raster, CANONICAL_BANDS,
};
use proptest::prelude::*;

fn arb_raster() -> impl Strategy<Value = Raster> {
    (1usize..6, 1usize..6, 1usize..4, any::<bool>(), any::<bool>())
        .prop_flat_map(|(w, h, nb, has_nodata, mercator)| {
            let values = proptest::collection::vec(proptest::collection::vec(any::<f32>(), w * h), nb);
            let origin = (-1000.0f64..1000.0, -1000.0f64..1000.0, 0.001f64..100.0, 0.001f64..100.0);
            (Just((w, h, nb, has_nodata, mercator)), values, origin)
        })
        .prop_map(|((w, h, nb, has_nodata, mercator), values, (ox, oy, pw, ph))| {
            Raster::new(
                w,
                h,
                CANONICAL_BANDS[..nb].iter().map(|s| s.to_string()).collect(),
                values.into_iter().map(BandPlane::new).collect(),
                GeoTransform::north_up(ox, oy, pw, -ph),
                if mercator { Crs::WebMercator } else { Crs::Wgs84 },
                has_nodata.then_some(-9999.0),
            )
            .unwrap()
        })
}

fn bits(r: &Raster) -> Vec<Vec<u32>> {
    r.bands()
        .iter()
        .map(|b| b.values().iter().map(|v| v.to_bits()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn save_load_is_bit_exact(r in arb_raster()) {
        let dir = tempfile::tempdir().unwrap();
        let path = save_raster(&r, dir.path().join("r.json")).unwrap();
        let back = load_raster(&path).unwrap();
        prop_assert_eq!(bits(&back), bits(&r));
        prop_assert_eq!(back.band_names(), r.band_names());
        prop_assert_eq!(back.geotransform(), r.geotransform());
        prop_assert_eq!(back.crs(), r.crs());
        prop_assert_eq!(back.nodata().map(f32::to_bits), r.nodata().map(f32::to_bits));
        let again = load_raster(&path).unwrap();
        prop_assert_eq!(bits(&again), bits(&back));
    }

    #[test]
    fn select_of_select(r in arb_raster(), pick in proptest::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let names = r.band_names().to_vec();
        let mut a: Vec<String> = pick.iter().map(|i| names[i.index(names.len())].clone()).collect();
        a.dedup();
        a.sort();
        a.dedup();
        let b = vec![a[a.len() - 1].clone()];
        let direct = r.select_bands(&b).unwrap();
        let nested = r.select_bands(&a).unwrap().select_bands(&b).unwrap();
        prop_assert_eq!(bits(&direct), bits(&nested));
        prop_assert_eq!(direct.band_names(), nested.band_names());
        prop_assert_eq!(direct.geotransform(), nested.geotransform());
    }

    #[test]
    fn crop_is_affine_consistent(r in arb_raster(), c0 in 0usize..5, r0 in 0usize..5) {
        let (c0, r0) = (c0 % r.width(), r0 % r.height());
        let (w, h) = (r.width() - c0, r.height() - r0);
        let crop = r.crop_window(c0, r0, w, h).unwrap();
        for (c, row) in [(0usize, 0usize), (w - 1, h - 1), (w / 2, h / 2)] {
            let (x1, y1) = crop.geotransform().pixel_to_world(c as f64, row as f64);
            let (x2, y2) = r.geotransform().pixel_to_world((c + c0) as f64, (row + r0) as f64);
            prop_assert!((x1 - x2).abs() <= 1e-9 * x2.abs().max(1.0));
            prop_assert!((y1 - y2).abs() <= 1e-9 * y2.abs().max(1.0));
            for b in 0..r.bands().len() {
                prop_assert_eq!(
                    crop.bands()[b].values()[row * w + c].to_bits(),
                    r.bands()[b].values()[(row + r0) * r.width() + c + c0].to_bits()
                );
            }
        }
        let full = r.crop_window(0, 0, r.width(), r.height()).unwrap();
        prop_assert_eq!(bits(&full), bits(&r));
        prop_assert_eq!(full.geotransform(), r.geotransform());
    }
}

/// PNG ingestion checked against the `png` crate's decoder.
#[test]
fn png_matches_reference_decoder() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.png");
    let (w, h) = (4u32, 4u32);
    let data: Vec<u8> = (0..w * h * 3).map(|i| (i * 37 % 256) as u8).collect();
    {
        let file = std::fs::File::create(&path).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&data).unwrap();
    }
    let decoder = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(&path).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    let reference = &buf[..info.buffer_size()];

    let r = load_raster(&path).unwrap();
    assert_eq!(r.band_names(), ["RED", "GREEN", "BLUE"]);
    assert_eq!((r.width(), r.height()), (4, 4));
    for (b, band) in r.bands().iter().enumerate() {
        for (i, v) in band.values().iter().enumerate() {
            assert_eq!(*v, reference[i * 3 + b] as f32 / 255.0);
        }
    }
}
