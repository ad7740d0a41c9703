use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CohortSchema, SubjectRecord};
use crate::error::{Error, Result};
use crate::model::ImageBag;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    label: u8,
    #[serde(default)]
    biomarkers: Option<Vec<f64>>,
    #[serde(default)]
    image_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_nodules: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    site: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub schema: CohortSchema,
    /// Keep subjects that carry neither modality (used for prediction, where
    /// they are reported as unpredictable instead of failing the load).
    pub allow_no_modality: bool,
}

fn schema_err(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

fn check_finite(line: usize, field: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(schema_err(line, format!("field `{field}`: non-finite value")));
    }
    Ok(())
}

fn convert(raw: RawRecord, line: usize, opts: &LoadOptions) -> Result<SubjectRecord> {
    let schema = &opts.schema;
    if raw.label > 1 {
        return Err(schema_err(line, format!("field `label`: expected 0 or 1, got {}", raw.label)));
    }
    if let Some(b) = &raw.biomarkers {
        if b.len() != schema.biomarker_width {
            return Err(schema_err(
                line,
                format!(
                    "field `biomarkers`: expected {} values, got {}",
                    schema.biomarker_width,
                    b.len()
                ),
            ));
        }
        check_finite(line, "biomarkers", b)?;
    }
    let image_bag = match (raw.image_features, raw.num_nodules) {
        (None, None) => None,
        (None, Some(_)) => {
            return Err(schema_err(line, "field `num_nodules` given without `image_features`"))
        }
        (Some(_), None) => {
            return Err(schema_err(line, "field `num_nodules` is required with `image_features`"))
        }
        (Some(rows), Some(count)) => {
            if count == 0 {
                return Err(Error::subject(&raw.id, "image bag has 0 real instances"));
            }
            if rows.len() > schema.bag_capacity {
                return Err(schema_err(
                    line,
                    format!(
                        "field `image_features`: at most {} rows allowed, got {}",
                        schema.bag_capacity,
                        rows.len()
                    ),
                ));
            }
            if count > rows.len() {
                return Err(schema_err(
                    line,
                    format!("field `num_nodules`: {count} exceeds the {} rows given", rows.len()),
                ));
            }
            for row in &rows {
                if row.len() != schema.image_feature_width {
                    return Err(schema_err(
                        line,
                        format!(
                            "field `image_features`: rows must have {} values, got {}",
                            schema.image_feature_width,
                            row.len()
                        ),
                    ));
                }
                check_finite(line, "image_features", row)?;
            }
            if rows[count..].iter().flatten().any(|v| *v != 0.0) {
                return Err(schema_err(
                    line,
                    "field `image_features`: rows beyond `num_nodules` must be zero padding",
                ));
            }
            Some(ImageBag::padded(
                &rows[..count],
                schema.image_feature_width,
                schema.bag_capacity,
            )?)
        }
    };
    if image_bag.is_none() && raw.biomarkers.is_none() && !opts.allow_no_modality {
        return Err(Error::subject(&raw.id, "neither biomarkers nor image features present"));
    }
    Ok(SubjectRecord {
        id: raw.id,
        label: raw.label,
        biomarkers: raw.biomarkers,
        image_bag,
        site: raw.site,
    })
}

/// Parses JSON-lines cohort text. Blank lines are skipped.
pub fn parse_cohort(text: &str, opts: &LoadOptions) -> Result<Vec<SubjectRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| schema_err(line_no, e.to_string()))?;
        let record = convert(raw, line_no, opts)?;
        if !seen.insert(record.id.clone()) {
            return Err(schema_err(line_no, format!("duplicate id {:?}", record.id)));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_cohort(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Vec<SubjectRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cohort(&text, opts)
}

/// Writes one JSON object per line; only real image rows are written.
pub fn write_cohort(path: impl AsRef<Path>, records: &[SubjectRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        let raw = RawRecord {
            id: r.id.clone(),
            label: r.label,
            biomarkers: r.biomarkers.clone(),
            image_features: r
                .image_bag
                .as_ref()
                .map(|b| b.real_rows().map(<[f64]>::to_vec).collect()),
            num_nodules: r.image_bag.as_ref().map(|b| b.real_count()),
            site: r.site.clone(),
        };
        serde_json::to_writer(&mut buf, &raw)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Fold file: a JSON object mapping subject id to fold index.
pub fn write_folds(path: impl AsRef<Path>, folds: &BTreeMap<String, usize>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(folds)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_folds(path: impl AsRef<Path>) -> Result<BTreeMap<String, usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
