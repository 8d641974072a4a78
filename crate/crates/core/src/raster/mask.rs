use std::collections::{BTreeMap, BTreeSet};

use super::{Crs, GeoTransform, RasterError};

#[derive(Debug, Clone, PartialEq)]
pub enum MaskValues {
    Bool(Vec<bool>),
    Class(Vec<u32>),
}

impl MaskValues {
    pub fn len(&self) -> usize {
        match self {
            MaskValues::Bool(v) => v.len(),
            MaskValues::Class(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel value as a class id (`true` = 1).
    pub fn get(&self, i: usize) -> u32 {
        match self {
            MaskValues::Bool(v) => v[i] as u32,
            MaskValues::Class(v) => v[i],
        }
    }
}

/// Per-pixel labels, either booleans or nonnegative class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    values: MaskValues,
    legend: Option<BTreeMap<u32, String>>,
    georef: Option<(GeoTransform, Crs)>,
}

impl Mask {
    pub fn new(
        width: usize,
        height: usize,
        values: MaskValues,
        legend: Option<BTreeMap<u32, String>>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Invalid(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(RasterError::Invalid(format!(
                "mask has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        let mask = Mask {
            width,
            height,
            values,
            legend,
            georef: None,
        };
        if let Some(legend) = &mask.legend {
            if let Some(missing) = mask.distinct_values().into_iter().find(|v| !legend.contains_key(v)) {
                return Err(RasterError::Invalid(format!(
                    "legend does not cover class {missing}"
                )));
            }
        }
        Ok(mask)
    }

    pub fn from_bools(width: usize, height: usize, values: Vec<bool>) -> Result<Self, RasterError> {
        Mask::new(width, height, MaskValues::Bool(values), None)
    }

    pub fn from_classes(width: usize, height: usize, values: Vec<u32>) -> Result<Self, RasterError> {
        Mask::new(width, height, MaskValues::Class(values), None)
    }

    pub fn with_georef(mut self, geotransform: GeoTransform, crs: Crs) -> Result<Self, RasterError> {
        geotransform.check_north_up()?;
        self.georef = Some((geotransform, crs));
        Ok(self)
    }

    pub(crate) fn with_georef_opt(mut self, georef: Option<(GeoTransform, Crs)>) -> Self {
        self.georef = georef;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &MaskValues {
        &self.values
    }

    pub fn legend(&self) -> Option<&BTreeMap<u32, String>> {
        self.legend.as_ref()
    }

    pub fn georef(&self) -> Option<(GeoTransform, Crs)> {
        self.georef
    }

    pub fn is_boolean(&self) -> bool {
        matches!(self.values, MaskValues::Bool(_))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.values.get(i)
    }

    pub fn distinct_values(&self) -> BTreeSet<u32> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn contains(&self, class_id: u32) -> bool {
        (0..self.len()).any(|i| self.get(i) == class_id)
    }

    pub fn count(&self, class_id: u32) -> usize {
        (0..self.len()).filter(|&i| self.get(i) == class_id).count()
    }

    /// Boolean mask of pixels equal to `class_id`, keeping the georeference.
    pub fn equals(&self, class_id: u32) -> Mask {
        let values = (0..self.len()).map(|i| self.get(i) == class_id).collect();
        Mask {
            width: self.width,
            height: self.height,
            values: MaskValues::Bool(values),
            legend: None,
            georef: self.georef,
        }
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn payload_bytes(&self) -> usize {
        match &self.values {
            MaskValues::Bool(v) => v.len(),
            MaskValues::Class(v) => v.len() * 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_membership() {
        let m = Mask::from_classes(2, 2, vec![11, 0, 11, 5]).unwrap();
        assert!(m.contains(11));
        assert!(!m.contains(8));
        assert_eq!(m.count(11), 2);
        let b = m.equals(11);
        assert!(b.is_boolean());
        assert_eq!(b.count(1), 2);
    }

    #[test]
    fn legend_must_cover_values() {
        let legend: BTreeMap<u32, String> = [(1, "water".to_string())].into();
        assert!(Mask::new(1, 2, MaskValues::Class(vec![1, 2]), Some(legend.clone())).is_err());
        assert!(Mask::new(1, 2, MaskValues::Class(vec![1, 1]), Some(legend)).is_ok());
    }

    #[test]
    fn shape_checked() {
        assert!(Mask::from_bools(2, 2, vec![true]).is_err());
    }
}
