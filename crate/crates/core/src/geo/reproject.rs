use crate::raster::{BandPlane, Crs, GeoTransform, Raster, DEFAULT_NODATA};

use super::mercator::{lonlat_to_mercator, mercator_to_lonlat, MAX_LATITUDE};
use super::{GeoBounds, GeoError};

fn forward(src: Crs, dst: Crs, x: f64, y: f64) -> Result<(f64, f64), GeoError> {
    match (src, dst) {
        (a, b) if a == b => Ok((x, y)),
        (Crs::Wgs84, Crs::WebMercator) => lonlat_to_mercator(x, y),
        (Crs::WebMercator, Crs::Wgs84) => Ok(mercator_to_lonlat(x, y)),
        _ => unreachable!("closed crs set"),
    }
}

/// Nearest-neighbour reprojection between the supported CRSs.
///
/// The two supported projections are separable in x and y, so the source
/// extent maps to an axis-aligned destination extent. The destination pixel
/// size is the projected size of the source's center pixel.
pub fn reproject(r: &Raster, dst: Crs) -> Result<Raster, GeoError> {
    let src = r.crs();
    if src == dst {
        return Ok(r.clone());
    }
    let bounds = GeoBounds::of_raster(r);
    if src == Crs::Wgs84 {
        for lat in [bounds.min_y, bounds.max_y] {
            if lat.abs() > MAX_LATITUDE {
                return Err(GeoError::LatitudeOutOfRange(lat));
            }
        }
    }
    let (min_x, min_y) = forward(src, dst, bounds.min_x, bounds.min_y)?;
    let (max_x, max_y) = forward(src, dst, bounds.max_x, bounds.max_y)?;

    let gt = r.geotransform();
    let (cc, cr) = ((r.width() / 2) as f64, (r.height() / 2) as f64);
    let (ax, ay) = gt.pixel_to_world(cc, cr);
    let (bx, by) = gt.pixel_to_world(cc + 1.0, cr + 1.0);
    let (pax, pay) = forward(src, dst, ax, ay)?;
    let (pbx, pby) = forward(src, dst, bx, by)?;
    let px_w = (pbx - pax).abs();
    let px_h = (pby - pay).abs();

    let out_w = (((max_x - min_x) / px_w).round() as usize).max(1);
    let out_h = (((max_y - min_y) / px_h).round() as usize).max(1);
    let out_gt = GeoTransform::north_up(
        min_x,
        max_y,
        (max_x - min_x) / out_w as f64,
        -(max_y - min_y) / out_h as f64,
    );

    let mut index = Vec::with_capacity(out_w * out_h);
    let mut any_outside = false;
    for row in 0..out_h {
        for col in 0..out_w {
            let (x, y) = out_gt.pixel_to_world(col as f64 + 0.5, row as f64 + 0.5);
            let (sx, sy) = forward(dst, src, x, y)?;
            let fc = (sx - gt.origin_x) / gt.pixel_w;
            let fr = (sy - gt.origin_y) / gt.pixel_h;
            let inside = fc >= 0.0 && fr >= 0.0 && fc < r.width() as f64 && fr < r.height() as f64;
            if inside {
                index.push(Some(fr as usize * r.width() + fc as usize));
            } else {
                any_outside = true;
                index.push(None);
            }
        }
    }
    let nodata = match (r.nodata(), any_outside) {
        (Some(nd), _) => Some(nd),
        (None, true) => Some(DEFAULT_NODATA),
        (None, false) => None,
    };
    let fill = nodata.unwrap_or(DEFAULT_NODATA);
    let bands = r
        .bands()
        .iter()
        .map(|b| {
            let v = b.values();
            BandPlane::new(index.iter().map(|i| i.map_or(fill, |i| v[i])).collect())
        })
        .collect();
    Ok(Raster::new(
        out_w,
        out_h,
        r.band_names().to_vec(),
        bands,
        out_gt,
        dst,
        nodata,
    )?)
}
