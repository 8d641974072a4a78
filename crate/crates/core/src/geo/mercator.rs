//! Spherical Web Mercator (EPSG:3857).

use std::f64::consts::PI;

use super::GeoError;

pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Latitude where the projected square world ends, atan(sinh(π)).
pub const MAX_LATITUDE: f64 = 85.051_128_779_806_59;

/// Half the projected world width, π·R.
pub const ORIGIN_SHIFT: f64 = PI * EARTH_RADIUS_M;

pub fn lonlat_to_mercator(lon: f64, lat: f64) -> Result<(f64, f64), GeoError> {
    if lat.is_nan() || lat.abs() > MAX_LATITUDE {
        return Err(GeoError::LatitudeOutOfRange(lat));
    }
    let x = EARTH_RADIUS_M * lon.to_radians();
    let y = EARTH_RADIUS_M * (PI / 4.0 + lat.to_radians() / 2.0).tan().ln();
    Ok((x, y))
}

pub fn mercator_to_lonlat(x: f64, y: f64) -> (f64, f64) {
    let lon = (x / EARTH_RADIUS_M).to_degrees();
    let lat = (2.0 * (y / EARTH_RADIUS_M).exp().atan() - PI / 2.0).to_degrees();
    (lon, lat)
}
