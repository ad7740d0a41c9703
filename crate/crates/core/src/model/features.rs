use crate::error::{Error, Result};

/// A padded bag of per-nodule feature vectors. Rows `real_count..` are
/// padding and carry no information.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBag {
    width: usize,
    real_count: usize,
    /// Row-major `[rows × width]`.
    data: Vec<f64>,
}

impl ImageBag {
    /// Builds a bag from the real instances and pads it with zero rows up
    /// to `capacity`.
    pub fn padded(instances: &[Vec<f64>], width: usize, capacity: usize) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Data("image bag has no real instances".into()));
        }
        if instances.len() > capacity {
            return Err(Error::Data(format!(
                "image bag has {} instances, capacity is {capacity}",
                instances.len()
            )));
        }
        let mut data = Vec::with_capacity(capacity * width);
        for row in instances {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    context: "image instance",
                    expected: width,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        data.resize(capacity * width, 0.0);
        Ok(Self {
            width,
            real_count: instances.len(),
            data,
        })
    }

    /// Raw constructor: `data` holds `rows × width` values and the first
    /// `real_count` rows are real.
    pub fn from_rows(data: Vec<f64>, width: usize, real_count: usize) -> Result<Self> {
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::Data(format!(
                "bag data of length {} is not a multiple of width {width}",
                data.len()
            )));
        }
        if real_count == 0 || real_count > data.len() / width {
            return Err(Error::Data(format!(
                "real instance count {real_count} outside 1..={}",
                data.len() / width
            )));
        }
        Ok(Self {
            width,
            real_count,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn real_count(&self) -> usize {
        self.real_count
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn real_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data[..self.real_count * self.width].chunks_exact(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalityMask {
    pub has_image: bool,
    pub has_bio: bool,
}

impl ModalityMask {
    pub fn is_complete(self) -> bool {
        self.has_image && self.has_bio
    }

    pub fn is_empty(self) -> bool {
        !self.has_image && !self.has_bio
    }
}

/// Model-ready (normalized) inputs of one subject.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectFeatures {
    pub image: Option<ImageBag>,
    pub biomarkers: Option<Vec<f64>>,
}

impl SubjectFeatures {
    pub fn mask(&self) -> ModalityMask {
        ModalityMask {
            has_image: self.image.is_some(),
            has_bio: self.biomarkers.is_some(),
        }
    }
}
