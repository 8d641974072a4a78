use crate::raster::{BandPlane, GeoTransform, Raster, DEFAULT_NODATA};

use super::GeoError;

const ALIGN_TOL: f64 = 1e-6;

fn lattice_offset(delta: f64, step: f64) -> Result<usize, GeoError> {
    let f = delta / step;
    let n = f.round();
    if (f - n).abs() > ALIGN_TOL || n < 0.0 {
        return Err(GeoError::GridMisaligned(format!(
            "origin offset {delta} is not a multiple of pixel size {step}"
        )));
    }
    Ok(n as usize)
}

/// Merges rasters on a shared pixel lattice into their union extent.
///
/// Where several inputs hold valid data for a pixel the earliest one wins;
/// later inputs only fill pixels that are still nodata.
pub fn mosaic(rs: &[Raster]) -> Result<Raster, GeoError> {
    let first = rs.first().ok_or(GeoError::EmptyInput)?;
    let gt0 = first.geotransform();
    for r in &rs[1..] {
        if r.crs() != first.crs() {
            return Err(GeoError::CrsMismatch(first.crs(), r.crs()));
        }
        let gt = r.geotransform();
        let same = |a: f64, b: f64| (a - b).abs() <= ALIGN_TOL * a.abs().max(b.abs());
        if !same(gt.pixel_w, gt0.pixel_w) || !same(gt.pixel_h, gt0.pixel_h) {
            return Err(GeoError::GridMisaligned("pixel sizes differ".into()));
        }
        if r.band_names() != first.band_names() {
            return Err(GeoError::GridMisaligned(format!(
                "band sets differ: {:?} vs {:?}",
                first.band_names(),
                r.band_names()
            )));
        }
    }
    if rs.len() == 1 {
        return Ok(first.clone());
    }

    let min_x = rs.iter().map(|r| r.geotransform().origin_x).fold(f64::INFINITY, f64::min);
    let max_y = rs
        .iter()
        .map(|r| r.geotransform().origin_y)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut placements = Vec::with_capacity(rs.len());
    let (mut width, mut height) = (0usize, 0usize);
    for r in rs {
        let gt = r.geotransform();
        let col = lattice_offset(gt.origin_x - min_x, gt0.pixel_w)?;
        let row = lattice_offset(gt.origin_y - max_y, gt0.pixel_h)?;
        width = width.max(col + r.width());
        height = height.max(row + r.height());
        placements.push((col, row));
    }

    let nb = first.band_names().len();
    let mut planes = vec![vec![0.0f32; width * height]; nb];
    let mut filled = vec![vec![false; width * height]; nb];
    for (r, &(col0, row0)) in rs.iter().zip(&placements) {
        for b in 0..nb {
            let src = r.bands()[b].values();
            for row in 0..r.height() {
                for col in 0..r.width() {
                    let v = src[row * r.width() + col];
                    let dst = (row0 + row) * width + col0 + col;
                    if !filled[b][dst] && !r.is_nodata(v) {
                        planes[b][dst] = v;
                        filled[b][dst] = true;
                    }
                }
            }
        }
    }
    let any_empty = filled.iter().flatten().any(|f| !f);
    let nodata = rs
        .iter()
        .find_map(|r| r.nodata())
        .or(any_empty.then_some(DEFAULT_NODATA));
    if let Some(nd) = nodata {
        for (plane, mask) in planes.iter_mut().zip(&filled) {
            for (v, ok) in plane.iter_mut().zip(mask) {
                if !ok {
                    *v = nd;
                }
            }
        }
    }
    let gt = GeoTransform::north_up(min_x, max_y, gt0.pixel_w, gt0.pixel_h);
    Ok(Raster::new(
        width,
        height,
        first.band_names().to_vec(),
        planes.into_iter().map(BandPlane::new).collect(),
        gt,
        first.crs(),
        nodata,
    )?)
}
