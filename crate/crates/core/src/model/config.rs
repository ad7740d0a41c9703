use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// The combined path consumes the two sub-path probabilities.
    M3Net1,
    /// The combined path consumes the two `dim`-wide sub-path features.
    M3Net2,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::M3Net1 => "m3net1",
            Variant::M3Net2 => "m3net2",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m3net1" => Ok(Variant::M3Net1),
            "m3net2" => Ok(Variant::M3Net2),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?} (expected m3net1 or m3net2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Width of each sub-path feature entering the combined path.
    pub dim: usize,
    pub image_feature_width: usize,
    pub bag_capacity: usize,
    pub biomarker_width: usize,
    pub attention_hidden: usize,
    pub bio_hidden: usize,
    pub combined_hidden: usize,
    pub blood_index: usize,
    pub mayo_index: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::M3Net1,
            dim: 5,
            image_feature_width: 128,
            bag_capacity: 5,
            biomarker_width: 10,
            attention_hidden: 64,
            bio_hidden: 32,
            combined_hidden: 16,
            blood_index: 0,
            mayo_index: 9,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("dim", self.dim),
            ("image_feature_width", self.image_feature_width),
            ("bag_capacity", self.bag_capacity),
            ("biomarker_width", self.biomarker_width),
            ("attention_hidden", self.attention_hidden),
            ("bio_hidden", self.bio_hidden),
            ("combined_hidden", self.combined_hidden),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.blood_index == self.mayo_index {
            return Err(Error::InvalidConfig(
                "blood_index and mayo_index must differ".into(),
            ));
        }
        if self.blood_index >= self.biomarker_width || self.mayo_index >= self.biomarker_width {
            return Err(Error::InvalidConfig(format!(
                "blood_index and mayo_index must be below biomarker_width ({})",
                self.biomarker_width
            )));
        }
        Ok(())
    }

    /// Length of the combined-path input vector.
    pub fn combined_input_width(&self) -> usize {
        match self.variant {
            Variant::M3Net1 => 4,
            Variant::M3Net2 => 2 * self.dim + 2,
        }
    }

    /// Human-readable tag, e.g. `M3Net1` or `M3Net2 (Dim=5)`.
    pub fn label(&self) -> String {
        match self.variant {
            Variant::M3Net1 => "M3Net1".to_owned(),
            Variant::M3Net2 => format!("M3Net2 (Dim={})", self.dim),
        }
    }
}
