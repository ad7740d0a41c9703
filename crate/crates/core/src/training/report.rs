use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainSeeds};
use crate::error::{Error, Result};
use crate::model::RiskSource;
use crate::stats::{format_mean_std, mean_std, BootstrapResult, ScoreSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CrossValidation,
    ExternalValidation,
}

/// Which subjects enter the training and validation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingSubset {
    All,
    CompleteOnly,
}

/// Output heads of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Combined,
    Image,
    Biomarker,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Combined, Head::Image, Head::Biomarker];
}

/// Test AUCs of the three heads over the same (complete) subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadAucs {
    pub combined: f64,
    pub image: f64,
    pub biomarker: f64,
}

impl HeadAucs {
    pub fn get(&self, head: Head) -> f64 {
        match head {
            Head::Combined => self.combined,
            Head::Image => self.image,
            Head::Biomarker => self.biomarker,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }

    pub fn formatted(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSummary {
    pub combined: MeanStd,
    pub image: MeanStd,
    pub biomarker: MeanStd,
}

impl HeadSummary {
    pub fn of(aucs: &[HeadAucs]) -> Self {
        let col = |h: Head| MeanStd::of(&aucs.iter().map(|a| a.get(h)).collect::<Vec<_>>());
        Self {
            combined: col(Head::Combined),
            image: col(Head::Image),
            biomarker: col(Head::Biomarker),
        }
    }

    pub fn get(&self, head: Head) -> MeanStd {
        match head {
            Head::Combined => self.combined,
            Head::Image => self.image,
            Head::Biomarker => self.biomarker,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_test_complete: usize,
    pub checkpoint_epoch: usize,
    pub val_auc: f64,
    pub test_auc: HeadAucs,
    pub seeds: TrainSeeds,
}

/// One model's outputs for one test subject. `fold` is the held-out fold
/// (cross-validation) or the model index (external validation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: u8,
    pub fold: usize,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub p_combined: Option<f64>,
    pub risk: f64,
    pub source: RiskSource,
}

impl Prediction {
    pub fn is_complete(&self) -> bool {
        self.p_combined.is_some()
    }

    pub fn head(&self, head: Head) -> Option<f64> {
        match head {
            Head::Combined => self.p_combined,
            Head::Image => self.p1,
            Head::Biomarker => self.p2,
        }
    }
}

/// Per-subject mean over the fold models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub id: String,
    pub label: u8,
    pub p1: f64,
    pub p2: f64,
    pub p_combined: f64,
}

/// The two external protocols: mean ± std of the fold models' AUCs, and
/// the AUC (with bootstrap CI) of the per-subject ensemble mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSummary {
    pub per_model: HeadSummary,
    pub ensemble_combined: BootstrapResult,
    pub ensemble_image: BootstrapResult,
    pub ensemble_biomarker: BootstrapResult,
    pub ensemble_predictions: Vec<EnsemblePrediction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSeeds {
    pub master: u64,
    pub split: u64,
    pub folds: Vec<TrainSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Row label, e.g. `M3Net2 (Dim=5)`.
    pub label: String,
    pub training_subset: TrainingSubset,
    pub config: TrainConfig,
    pub seeds: ExperimentSeeds,
    pub folds: Vec<FoldResult>,
    /// Mean ± std of the per-fold (per-model) test AUCs.
    pub summary: HeadSummary,
    /// Cross-validation AUCs over all out-of-fold complete predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled: Option<HeadAucs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalSummary>,
    pub predictions: Vec<Prediction>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Scores of `head` over complete subjects, in prediction order. For an
    /// external report these are the ensemble means.
    pub fn complete_scores(&self, head: Head) -> Result<ScoreSet> {
        if let Some(ext) = &self.external {
            let e = &ext.ensemble_predictions;
            let score = |p: &EnsemblePrediction| match head {
                Head::Combined => p.p_combined,
                Head::Image => p.p1,
                Head::Biomarker => p.p2,
            };
            return ScoreSet::new(
                e.iter().map(|p| p.id.clone()).collect(),
                e.iter().map(|p| p.label).collect(),
                e.iter().map(score).collect(),
            );
        }
        let complete: Vec<&Prediction> = self.predictions.iter().filter(|p| p.is_complete()).collect();
        let scores = complete
            .iter()
            .map(|p| {
                p.head(head)
                    .ok_or_else(|| Error::Data(format!("prediction for {} lacks a head output", p.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreSet::new(
            complete.iter().map(|p| p.id.clone()).collect(),
            complete.iter().map(|p| p.label).collect(),
            scores,
        )
    }

    /// Headline cross-validation AUC of `head`: pooled when configured,
    /// otherwise the per-fold mean.
    pub fn headline(&self, head: Head) -> f64 {
        match (&self.pooled, self.config.pooled_auc) {
            (Some(p), true) => p.get(head),
            _ => self.summary.get(head).mean,
        }
    }

    fn cell(&self, head: Head, column: Column) -> Option<String> {
        match (self.kind, column) {
            (ExperimentKind::CrossValidation, Column::Internal) => Some(match (&self.pooled, self.config.pooled_auc) {
                (Some(p), true) => format!("{:.3} (pooled)", p.get(head)),
                _ => self.summary.get(head).formatted(),
            }),
            (ExperimentKind::ExternalValidation, Column::PerModel) => Some(self.summary.get(head).formatted()),
            (ExperimentKind::ExternalValidation, Column::Ensemble) => self.external.as_ref().map(|e| {
                match head {
                    Head::Combined => &e.ensemble_combined,
                    Head::Image => &e.ensemble_image,
                    Head::Biomarker => &e.ensemble_biomarker,
                }
                .formatted()
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Internal,
    PerModel,
    Ensemble,
}

/// Plain-text table with one row per method and one column per protocol:
/// cross-validation (mean ± std over folds), external per-model (mean ± std)
/// and external ensemble (AUC with CI). Single-modality rows come from the
/// first report trained on all subjects.
pub fn render_table(reports: &[&ExperimentReport]) -> String {
    let columns: Vec<(Column, &str)> = [
        (Column::Internal, "Cross-validation"),
        (Column::PerModel, "External (per model)"),
        (Column::Ensemble, "External (ensemble)"),
    ]
    .into_iter()
    .filter(|(c, _)| reports.iter().any(|r| r.cell(Head::Combined, *c).is_some()))
    .collect();

    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let row = |label: String, head: Head, group: &[&&ExperimentReport]| {
        let cells = columns
            .iter()
            .map(|(c, _)| {
                group
                    .iter()
                    .find_map(|r| r.cell(head, *c))
                    .unwrap_or_else(|| "-".into())
            })
            .collect();
        (label, cells)
    };
    let full: Vec<&&ExperimentReport> =
        reports.iter().filter(|r| r.training_subset == TrainingSubset::All).collect();
    if let Some(first) = full.first() {
        let same: Vec<&&ExperimentReport> = full.iter().copied().filter(|r| r.label == first.label).collect();
        rows.push(row("Image only".into(), Head::Image, &same));
        rows.push(row("Biomarkers only".into(), Head::Biomarker, &same));
    }
    let mut seen: Vec<(String, TrainingSubset)> = Vec::new();
    for r in reports {
        let key = (r.label.clone(), r.training_subset);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let group: Vec<&&ExperimentReport> = reports
            .iter()
            .filter(|o| o.label == r.label && o.training_subset == r.training_subset)
            .collect();
        let label = match r.training_subset {
            TrainingSubset::All => r.label.clone(),
            TrainingSubset::CompleteOnly => format!("{} (complete-only training)", r.label),
        };
        rows.push(row(label, Head::Combined, &group));
    }

    let mut widths: Vec<usize> = std::iter::once("Method".len())
        .chain(columns.iter().map(|(_, h)| h.len()))
        .collect();
    for (label, cells) in &rows {
        widths[0] = widths[0].max(label.chars().count());
        for (w, c) in widths[1..].iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |first: &str, rest: &[String]| {
        let mut s = format!("{first:<w$}", w = widths[0]);
        for (c, w) in rest.iter().zip(&widths[1..]) {
            let pad = w.saturating_sub(c.chars().count());
            let _ = write!(s, "  {c}{}", " ".repeat(pad));
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    let header: Vec<String> = columns.iter().map(|(_, h)| h.to_string()).collect();
    line("Method", &header);
    for (label, cells) in &rows {
        line(label, cells);
    }
    out
}
