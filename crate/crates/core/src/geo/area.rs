use crate::raster::{Crs, GeoTransform, Mask};

use super::mercator::mercator_to_lonlat;
use super::{GeoBounds, GeoError};

/// Authalic (equal-area) Earth radius used for area on the sphere.
pub const AUTHALIC_RADIUS_M: f64 = 6_371_008.8;

/// Ground area of one pixel in `row`.
fn pixel_area(gt: &GeoTransform, crs: Crs, row: usize) -> f64 {
    match crs {
        Crs::WebMercator => {
            let (_, y) = gt.pixel_to_world(0.0, row as f64 + 0.5);
            let (_, lat) = mercator_to_lonlat(0.0, y);
            let c = lat.to_radians().cos();
            (gt.pixel_w * gt.pixel_h).abs() * c * c
        }
        Crs::Wgs84 => {
            let (_, top) = gt.pixel_to_world(0.0, row as f64);
            let (_, bottom) = gt.pixel_to_world(0.0, row as f64 + 1.0);
            let dlon = gt.pixel_w.abs().to_radians();
            AUTHALIC_RADIUS_M
                * AUTHALIC_RADIUS_M
                * dlon
                * (top.to_radians().sin() - bottom.to_radians().sin()).abs()
        }
    }
}

/// Area in m² of the pixels of `m` equal to `class_id` (`1` selects `true`
/// in boolean masks), on a spherical Earth.
pub fn mask_area_m2(m: &Mask, gt: &GeoTransform, crs: Crs, class_id: u32) -> Result<f64, GeoError> {
    gt.check_north_up()?;
    let mut total = 0.0;
    for row in 0..m.height() {
        let count = (0..m.width())
            .filter(|&col| m.get(row * m.width() + col) == class_id)
            .count();
        if count > 0 {
            total += count as f64 * pixel_area(gt, crs, row);
        }
    }
    Ok(total)
}

/// Area in m² of an axis-aligned extent on the same spherical model.
pub fn bounds_area_m2(b: &GeoBounds) -> f64 {
    match b.crs {
        Crs::Wgs84 => {
            AUTHALIC_RADIUS_M
                * AUTHALIC_RADIUS_M
                * (b.max_x - b.min_x).to_radians()
                * (b.max_y.to_radians().sin() - b.min_y.to_radians().sin())
        }
        Crs::WebMercator => {
            // cos²(lat) scale integrated over y has the closed form
            // R·(tanh(y1/R) − tanh(y0/R)) per unit width.
            let r = super::mercator::EARTH_RADIUS_M;
            (b.max_x - b.min_x) * r * ((b.max_y / r).tanh() - (b.min_y / r).tanh())
        }
    }
}
