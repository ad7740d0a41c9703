use serde::{Deserialize, Serialize};

use crate::model::{ImageBag, ModalityMask, ModelConfig};

/// Widths a cohort file must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub biomarker_width: usize,
    pub image_feature_width: usize,
    pub bag_capacity: usize,
}

impl Default for CohortSchema {
    fn default() -> Self {
        Self::from(&ModelConfig::default())
    }
}

impl From<&ModelConfig> for CohortSchema {
    fn from(c: &ModelConfig) -> Self {
        Self {
            biomarker_width: c.biomarker_width,
            image_feature_width: c.image_feature_width,
            bag_capacity: c.bag_capacity,
        }
    }
}

/// One subject as stored on disk: raw (unnormalized) values.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// 0 = benign, 1 = cancer.
    pub label: u8,
    pub biomarkers: Option<Vec<f64>>,
    /// Padded to the schema's bag capacity.
    pub image_bag: Option<ImageBag>,
    pub site: Option<String>,
}

impl SubjectRecord {
    pub fn mask(&self) -> ModalityMask {
        ModalityMask {
            has_image: self.image_bag.is_some(),
            has_bio: self.biomarkers.is_some(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.mask().is_complete()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StrataCounts {
    pub both: usize,
    pub image_only: usize,
    pub bio_only: usize,
    pub neither: usize,
}

pub fn strata_counts<'a>(records: impl IntoIterator<Item = &'a SubjectRecord>) -> StrataCounts {
    let mut c = StrataCounts::default();
    for r in records {
        let m = r.mask();
        match (m.has_image, m.has_bio) {
            (true, true) => c.both += 1,
            (true, false) => c.image_only += 1,
            (false, true) => c.bio_only += 1,
            (false, false) => c.neither += 1,
        }
    }
    c
}
