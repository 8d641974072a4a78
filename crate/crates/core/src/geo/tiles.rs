use crate::raster::{BandPlane, Raster};

use super::GeoError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub col0: usize,
    pub row0: usize,
    pub raster: Raster,
}

/// Partition of a raster into row-major tiles. Edge tiles may be smaller.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    pub tile_w: usize,
    pub tile_h: usize,
    pub tiles: Vec<Tile>,
}

impl TileGrid {
    /// Reassembles the source raster from its tiles.
    pub fn assemble(&self) -> Result<Raster, GeoError> {
        let first = &self
            .tiles
            .first()
            .ok_or(GeoError::EmptyInput)?
            .raster;
        let width = self
            .tiles
            .iter()
            .map(|t| t.col0 + t.raster.width())
            .max()
            .unwrap_or(0);
        let height = self
            .tiles
            .iter()
            .map(|t| t.row0 + t.raster.height())
            .max()
            .unwrap_or(0);
        let nb = first.bands().len();
        let mut planes = vec![vec![0.0f32; width * height]; nb];
        for tile in &self.tiles {
            let r = &tile.raster;
            for (b, plane) in planes.iter_mut().enumerate() {
                let src = r.bands()[b].values();
                for row in 0..r.height() {
                    let dst = (tile.row0 + row) * width + tile.col0;
                    plane[dst..dst + r.width()]
                        .copy_from_slice(&src[row * r.width()..(row + 1) * r.width()]);
                }
            }
        }
        let origin = self
            .tiles
            .iter()
            .find(|t| t.col0 == 0 && t.row0 == 0)
            .ok_or_else(|| GeoError::GridMisaligned("no tile at the origin".into()))?;
        Ok(Raster::new(
            width,
            height,
            first.band_names().to_vec(),
            planes.into_iter().map(BandPlane::new).collect(),
            origin.raster.geotransform(),
            first.crs(),
            first.nodata(),
        )?)
    }
}

pub fn make_tiles(r: &Raster, tile_w: usize, tile_h: usize) -> Result<TileGrid, GeoError> {
    if tile_w == 0 || tile_h == 0 {
        return Err(GeoError::InvalidTileSize(tile_w, tile_h));
    }
    let mut tiles = Vec::with_capacity(r.width().div_ceil(tile_w) * r.height().div_ceil(tile_h));
    for row0 in (0..r.height()).step_by(tile_h) {
        for col0 in (0..r.width()).step_by(tile_w) {
            let w = tile_w.min(r.width() - col0);
            let h = tile_h.min(r.height() - row0);
            tiles.push(Tile {
                col0,
                row0,
                raster: r.crop_window(col0, row0, w, h)?,
            });
        }
    }
    Ok(TileGrid {
        tile_w,
        tile_h,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Crs, GeoTransform};

    fn raster(w: usize, h: usize) -> Raster {
        Raster::single_band(
            w,
            h,
            "RED",
            (0..w * h).map(|i| i as f32).collect(),
            GeoTransform::north_up(100.0, 50.0, 0.5, -0.5),
            Crs::Wgs84,
            None,
        )
        .unwrap()
    }

    #[test]
    fn tile_counts() {
        assert_eq!(make_tiles(&raster(4, 4), 2, 2).unwrap().tiles.len(), 4);
        let grid = make_tiles(&raster(5, 4), 2, 2).unwrap();
        assert_eq!(grid.tiles.len(), 6);
        let right: Vec<_> = grid.tiles.iter().filter(|t| t.col0 == 4).collect();
        assert_eq!(right.len(), 2);
        assert!(right.iter().all(|t| t.raster.width() == 1));
    }

    #[test]
    fn reassembles_bit_exact() {
        let r = raster(7, 5);
        for (tw, th) in [(1, 1), (2, 3), (7, 5), (10, 10)] {
            assert_eq!(make_tiles(&r, tw, th).unwrap().assemble().unwrap(), r);
        }
    }

    #[test]
    fn zero_tile_rejected() {
        assert!(make_tiles(&raster(2, 2), 0, 1).is_err());
    }
}
