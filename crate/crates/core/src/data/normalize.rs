use serde::{Deserialize, Serialize};

use super::SubjectRecord;
use crate::error::{Error, Result};
use crate::model::{ImageBag, SubjectFeatures};

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, width: usize) -> Option<Self> {
        let n = rows.clone().count();
        if n == 0 {
            return None;
        }
        let mut mean = vec![0.0; width];
        for r in rows.clone() {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n as f64).sqrt()).collect();
        Some(Self { mean, std })
    }

    /// `(x - mean) / std`, or 0 on zero-variance channels.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "normalization input",
                expected: self.mean.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect())
    }
}

/// Training-set statistics for both modalities. A modality absent from the
/// training set has no statistics; normalizing such a subject is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub biomarker: Option<ChannelStats>,
    /// Computed over real instances only.
    pub image: Option<ChannelStats>,
}

/// Statistics from the given (training) subjects.
pub fn compute_normalization(train: &[&SubjectRecord]) -> Result<NormalizationStats> {
    let bio_width = train.iter().find_map(|r| r.biomarkers.as_ref().map(Vec::len));
    let image_width = train.iter().find_map(|r| r.image_bag.as_ref().map(ImageBag::width));
    let biomarker = bio_width.and_then(|w| {
        ChannelStats::from_rows(
            train.iter().filter_map(|r| r.biomarkers.as_deref()),
            w,
        )
    });
    let image = image_width.and_then(|w| {
        ChannelStats::from_rows(
            train
                .iter()
                .filter_map(|r| r.image_bag.as_ref())
                .flat_map(|b| b.real_rows()),
            w,
        )
    });
    if biomarker.is_none() && image.is_none() {
        return Err(Error::Data(
            "cannot compute normalization: no training subject carries either modality".into(),
        ));
    }
    Ok(NormalizationStats { biomarker, image })
}

impl NormalizationStats {
    /// Model-ready features of one record. Padding rows stay zero.
    pub fn apply(&self, r: &SubjectRecord) -> Result<SubjectFeatures> {
        let biomarkers = match &r.biomarkers {
            None => None,
            Some(b) => {
                let stats = self.biomarker.as_ref().ok_or_else(|| {
                    Error::subject(&r.id, "no biomarker normalization statistics (none in training set)")
                })?;
                Some(stats.apply(b)?)
            }
        };
        let image = match &r.image_bag {
            None => None,
            Some(bag) => {
                let stats = self.image.as_ref().ok_or_else(|| {
                    Error::subject(&r.id, "no image normalization statistics (none in training set)")
                })?;
                let mut out = bag.clone();
                for k in 0..bag.real_count() {
                    let row = stats.apply(bag.row(k))?;
                    out.row_mut(k).copy_from_slice(&row);
                }
                Some(out)
            }
        };
        Ok(SubjectFeatures { image, biomarkers })
    }
}
