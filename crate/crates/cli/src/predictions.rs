//! Per-subject prediction files: `id,label,risk,path`.

use std::collections::HashMap;
use std::path::Path;

use m3net_core::stats::ScoreSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub label: Option<u8>,
    /// Empty for unpredictable subjects.
    pub risk: Option<f64>,
    /// `combined`, `image`, `biomarker` or `unpredictable`.
    pub path: String,
}

pub fn write(path: &Path, rows: &[PredictionRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> CliResult<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Labels from an `id,label` file.
pub fn read_labels(path: &Path) -> CliResult<HashMap<String, u8>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        label: u8,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if row.label > 1 {
            return Err(CliError::Data(format!("{}: label of {} must be 0 or 1", path.display(), row.id)));
        }
        out.insert(row.id, row.label);
    }
    Ok(out)
}

/// Scored subjects in file order. Labels come from `labels` when given,
/// otherwise from the file's own label column.
pub fn score_set(rows: &[PredictionRow], labels: Option<&HashMap<String, u8>>) -> CliResult<ScoreSet> {
    let mut ids = Vec::new();
    let mut ys = Vec::new();
    let mut scores = Vec::new();
    for r in rows {
        let Some(risk) = r.risk else { continue };
        let label = match labels {
            Some(map) => *map
                .get(&r.id)
                .ok_or_else(|| CliError::Data(format!("no label for subject {}", r.id)))?,
            None => r
                .label
                .ok_or_else(|| CliError::Data(format!("subject {} has no label; pass --labels", r.id)))?,
        };
        ids.push(r.id.clone());
        ys.push(label);
        scores.push(risk);
    }
    Ok(ScoreSet::new(ids, ys, scores)?)
}

/// Reorders `b` to follow `a`'s subject order; both must score the same ids.
pub fn align(a: &ScoreSet, b: &ScoreSet) -> CliResult<ScoreSet> {
    let index: HashMap<&str, usize> = b.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if index.len() != b.ids.len() || a.ids.len() != b.ids.len() {
        return Err(CliError::Data(format!(
            "paired files must score the same subjects ({} vs {})",
            a.ids.len(),
            b.ids.len()
        )));
    }
    let order = a
        .ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Data(format!("subject {id} missing from the second file")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ScoreSet::new(
        order.iter().map(|&i| b.ids[i].clone()).collect(),
        order.iter().map(|&i| b.labels[i]).collect(),
        order.iter().map(|&i| b.scores[i]).collect(),
    )?)
}
