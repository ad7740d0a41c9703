//! Versioned JSON model artifact: configuration, named parameter tensors
//! and the normalization statistics the model was trained under.
//!
//! Floats are written in shortest round-trip form, so a saved model
//! reproduces the in-memory model's predictions bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{NormalizationStats, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::{M3Net, M3NetParams, ModelConfig, RiskSource};
use crate::nn::Parameterized;
use crate::training::{Checkpoint, TrainSeeds};

pub const ARTIFACT_FORMAT: &str = "m3net-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub seeds: Option<TrainSeeds>,
    pub epoch: Option<usize>,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub normalization: NormalizationStats,
    pub provenance: Provenance,
    pub tensors: Vec<NamedTensor>,
}

/// A model ready for prediction on raw records.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: M3Net,
    pub normalization: NormalizationStats,
}

impl TrainedModel {
    pub fn predict(&self, record: &SubjectRecord) -> Result<(f64, RiskSource)> {
        self.model.predict_risk(&self.normalization.apply(record)?)
    }
}

impl ModelArtifact {
    pub fn new(model: &M3Net, normalization: &NormalizationStats, provenance: Provenance) -> Result<Self> {
        let tensors = M3NetParams::names()
            .iter()
            .zip(model.params())
            .map(|(name, p)| {
                if p.values().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Artifact(format!("{name} holds a non-finite value")));
                }
                Ok(NamedTensor {
                    name: (*name).to_string(),
                    shape: p.shape().to_vec(),
                    values: p.values().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            config: model.config().clone(),
            normalization: normalization.clone(),
            provenance,
            tensors,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Self::new(
            &ckpt.model,
            &ckpt.normalization,
            Provenance {
                seeds: Some(ckpt.seeds),
                epoch: Some(ckpt.epoch),
                val_auc: Some(ckpt.val_auc),
            },
        )
    }

    /// Rebuilds the model, checking format, version, tensor names and shapes.
    pub fn to_trained(&self) -> Result<TrainedModel> {
        if self.format != ARTIFACT_FORMAT {
            return Err(Error::Artifact(format!("unknown format {:?}", self.format)));
        }
        if self.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported version {} (expected {ARTIFACT_VERSION})",
                self.version
            )));
        }
        self.config.validate()?;
        let names = M3NetParams::names();
        if self.tensors.len() != names.len() {
            return Err(Error::Artifact(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        let mut model = M3Net::zeros(self.config.clone())?;
        for ((name, slot), t) in names.iter().zip(model.params_mut()).zip(&self.tensors) {
            if t.name != *name {
                return Err(Error::Artifact(format!("expected tensor {name}, found {}", t.name)));
            }
            if t.shape != slot.shape() || t.values.len() != slot.len() {
                return Err(Error::Artifact(format!(
                    "{name}: shape {:?} with {} values, config requires {:?}",
                    t.shape,
                    t.values.len(),
                    slot.shape()
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Artifact(format!("{name} holds a non-finite value")));
            }
            slot.values_mut().copy_from_slice(&t.values);
        }
        let n = &self.normalization;
        let widths = [
            (n.biomarker.as_ref(), self.config.biomarker_width, "biomarker"),
            (n.image.as_ref(), self.config.image_feature_width, "image"),
        ];
        for (stats, width, what) in widths {
            if let Some(s) = stats {
                if s.mean.len() != width || s.std.len() != width {
                    return Err(Error::Artifact(format!(
                        "{what} normalization has width {}, config requires {width}",
                        s.mean.len()
                    )));
                }
            }
        }
        Ok(TrainedModel {
            model,
            normalization: self.normalization.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Artifact(format!("malformed model file: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ChannelStats;
    use crate::seed::rng_from_seed;

    fn sample() -> (M3Net, NormalizationStats) {
        let model = M3Net::new(ModelConfig::default(), &mut rng_from_seed(3)).unwrap();
        let norm = NormalizationStats {
            biomarker: Some(ChannelStats {
                mean: vec![0.1; 10],
                std: vec![1.0 / 3.0; 10],
            }),
            image: None,
        };
        (model, norm)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (model, norm) = sample();
        let a = ModelArtifact::new(&model, &norm, Provenance { seeds: None, epoch: Some(4), val_auc: Some(0.7) }).unwrap();
        let b = ModelArtifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
        let t = b.to_trained().unwrap();
        for (x, y) in t.model.params().iter().zip(model.params()) {
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let (model, norm) = sample();
        let prov = Provenance { seeds: None, epoch: None, val_auc: None };
        let mut a = ModelArtifact::new(&model, &norm, prov.clone()).unwrap();
        a.version = 99;
        assert!(matches!(a.to_trained(), Err(Error::Artifact(_))));
        let mut a = ModelArtifact::new(&model, &norm, prov.clone()).unwrap();
        a.tensors[3].values.pop();
        assert!(matches!(a.to_trained(), Err(Error::Artifact(_))));
        let mut a = ModelArtifact::new(&model, &norm, prov).unwrap();
        a.tensors.swap(0, 1);
        assert!(matches!(a.to_trained(), Err(Error::Artifact(_))));
    }
}
