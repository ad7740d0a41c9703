use std::collections::HashSet;

use rayon::prelude::*;

use super::report::{
    EnsemblePrediction, ExperimentKind, ExperimentReport, ExperimentSeeds, ExternalSummary, FoldResult, Head,
    HeadAucs, HeadSummary, Prediction, TrainingSubset,
};
use super::trainer::{fold_seeds, train_with_seeds, Checkpoint};
use super::TrainConfig;
use crate::data::{kfold_split, split_train_val, FoldSplit, SubjectRecord};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, STREAM_SPLIT};
use crate::stats::{auc_slices, bootstrap_ci, BootstrapConfig, ScoreSet};

/// Runs `f` over `0..n` on `jobs` threads, returning results in index order.
fn run_jobs<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if jobs <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

fn split_seed(config: &TrainConfig) -> u64 {
    derive_seed(config.seed, STREAM_SPLIT)
}

fn check_disjoint(parts: [&[usize]; 3]) -> Result<()> {
    let mut seen = HashSet::new();
    for p in parts {
        for &i in p {
            if !seen.insert(i) {
                return Err(Error::Data(format!("subject index {i} appears in two roles")));
            }
        }
    }
    Ok(())
}

fn predict_one(ckpt: &Checkpoint, r: &SubjectRecord, fold: usize) -> Result<Prediction> {
    let features = ckpt.normalization.apply(r)?;
    let out = ckpt.model.forward(&features)?;
    let (risk, source) = ckpt.model.predict_risk(&features)?;
    if !risk.is_finite() {
        return Err(Error::NonFinite("test risk"));
    }
    Ok(Prediction {
        id: r.id.clone(),
        label: r.label,
        fold,
        p1: out.p1,
        p2: out.p2,
        p_combined: out.p_combined,
        risk,
        source,
    })
}

/// AUCs of all three heads over the complete predictions.
fn head_aucs(preds: &[&Prediction]) -> Result<HeadAucs> {
    let complete: Vec<&&Prediction> = preds.iter().filter(|p| p.is_complete()).collect();
    let labels: Vec<u8> = complete.iter().map(|p| p.label).collect();
    let auc_of = |h: Head| {
        let scores: Vec<f64> = complete.iter().map(|p| p.head(h).expect("complete")).collect();
        auc_slices(&labels, &scores)
    };
    Ok(HeadAucs {
        combined: auc_of(Head::Combined)?,
        image: auc_of(Head::Image)?,
        biomarker: auc_of(Head::Biomarker)?,
    })
}

fn run_cv(cohort: &[SubjectRecord], config: &TrainConfig, subset: TrainingSubset) -> Result<ExperimentReport> {
    config.validate()?;
    let split_seed = split_seed(config);
    let split = kfold_split(cohort, config.folds, split_seed, config.stratify_folds)?;
    let keep = |i: &usize| subset == TrainingSubset::All || cohort[*i].is_complete();

    let results = run_jobs(config.folds, config.jobs, |f| {
        let test = split.members(f);
        let n_test_complete = test.iter().filter(|&&i| cohort[i].is_complete()).count();
        if n_test_complete == 0 {
            return Err(Error::Data(format!("fold {f} has no complete test subjects")));
        }
        let (train, val) = split_train_val(&split.complement(f), derive_seed(split_seed, f as u64 + 1));
        let train: Vec<usize> = train.into_iter().filter(keep).collect();
        let val: Vec<usize> = val.into_iter().filter(keep).collect();
        check_disjoint([&train, &val, &test])?;
        let seeds = fold_seeds(config.seed, f, config.vary_init_across_folds);
        let refs = |idx: &[usize]| idx.iter().map(|&i| &cohort[i]).collect::<Vec<_>>();
        let ckpt = train_with_seeds(&refs(&train), &refs(&val), config, seeds)?;
        let preds = test
            .iter()
            .map(|&i| predict_one(&ckpt, &cohort[i], f))
            .collect::<Result<Vec<_>>>()?;
        let test_auc = head_aucs(&preds.iter().collect::<Vec<_>>())
            .map_err(|e| Error::Data(format!("fold {f}: {e}")))?;
        let fold = FoldResult {
            fold: f,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test.len(),
            n_test_complete,
            checkpoint_epoch: ckpt.epoch,
            val_auc: ckpt.val_auc,
            test_auc,
            seeds,
        };
        Ok((fold, preds))
    })?;

    let folds: Vec<FoldResult> = results.iter().map(|(f, _)| f.clone()).collect();
    let predictions: Vec<Prediction> = results.into_iter().flat_map(|(_, p)| p).collect();
    let pooled = head_aucs(&predictions.iter().collect::<Vec<_>>())?;
    Ok(ExperimentReport {
        kind: ExperimentKind::CrossValidation,
        label: config.model.label(),
        training_subset: subset,
        config: config.clone(),
        seeds: ExperimentSeeds {
            master: config.seed,
            split: split_seed,
            folds: folds.iter().map(|f| f.seeds).collect(),
        },
        summary: HeadSummary::of(&folds.iter().map(|f| f.test_auc).collect::<Vec<_>>()),
        folds,
        pooled: Some(pooled),
        external: None,
        predictions,
    })
}

/// k-fold cross-validation. Each fold is the test set once; the other folds
/// split 3:1 into training and validation. Test AUCs are computed over the
/// complete test subjects for all three heads; predictions cover every
/// test subject.
pub fn cross_validate(cohort: &[SubjectRecord], config: &TrainConfig) -> Result<ExperimentReport> {
    run_cv(cohort, config, TrainingSubset::All)
}

/// As [`cross_validate`] with the same folds and test sets, but incomplete
/// subjects are dropped from every training and validation set.
pub fn run_baseline_complete_only(cohort: &[SubjectRecord], config: &TrainConfig) -> Result<ExperimentReport> {
    run_cv(cohort, config, TrainingSubset::CompleteOnly)
}

/// Arithmetic mean of one subject's probabilities across the fold models.
pub fn ensemble_mean(probs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = probs.into_iter().fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
    sum / n as f64
}

/// Trains one model per fold of `train_cohort` (that fold validates, the
/// rest trains) and scores every subject of `test_cohort` with each.
pub fn external_validate(
    train_cohort: &[SubjectRecord],
    test_cohort: &[SubjectRecord],
    config: &TrainConfig,
    bootstrap: &BootstrapConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    if test_cohort.is_empty() {
        return Err(Error::Data("external test cohort is empty".into()));
    }
    if let Some(r) = test_cohort.iter().find(|r| !r.is_complete()) {
        return Err(Error::subject(
            &r.id,
            "external test subjects need both biomarkers and image features",
        ));
    }
    let split_seed = split_seed(config);
    let split: FoldSplit = kfold_split(train_cohort, config.folds, split_seed, config.stratify_folds)?;

    let results = run_jobs(config.folds, config.jobs, |f| {
        let val = split.members(f);
        let train = split.complement(f);
        let seeds = fold_seeds(config.seed, f, config.vary_init_across_folds);
        let refs = |idx: &[usize]| idx.iter().map(|&i| &train_cohort[i]).collect::<Vec<_>>();
        let ckpt = train_with_seeds(&refs(&train), &refs(&val), config, seeds)?;
        let preds = test_cohort
            .iter()
            .map(|r| predict_one(&ckpt, r, f))
            .collect::<Result<Vec<_>>>()?;
        let test_auc = head_aucs(&preds.iter().collect::<Vec<_>>())?;
        let fold = FoldResult {
            fold: f,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test_cohort.len(),
            n_test_complete: test_cohort.len(),
            checkpoint_epoch: ckpt.epoch,
            val_auc: ckpt.val_auc,
            test_auc,
            seeds,
        };
        Ok((fold, preds))
    })?;
    let folds: Vec<FoldResult> = results.iter().map(|(f, _)| f.clone()).collect();
    let predictions: Vec<Prediction> = results.into_iter().flat_map(|(_, p)| p).collect();

    let ensemble_predictions: Vec<EnsemblePrediction> = test_cohort
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let per_model = || predictions.iter().skip(i).step_by(test_cohort.len());
            let mean = |h: Head| ensemble_mean(per_model().map(|p| p.head(h).expect("complete")));
            EnsemblePrediction {
                id: r.id.clone(),
                label: r.label,
                p1: mean(Head::Image),
                p2: mean(Head::Biomarker),
                p_combined: mean(Head::Combined),
            }
        })
        .collect();
    let ci = |h: Head| {
        let scores = ensemble_predictions
            .iter()
            .map(|p| match h {
                Head::Combined => p.p_combined,
                Head::Image => p.p1,
                Head::Biomarker => p.p2,
            })
            .collect();
        let set = ScoreSet::new(
            ensemble_predictions.iter().map(|p| p.id.clone()).collect(),
            ensemble_predictions.iter().map(|p| p.label).collect(),
            scores,
        )?;
        bootstrap_ci(&set, bootstrap)
    };
    let summary = HeadSummary::of(&folds.iter().map(|f| f.test_auc).collect::<Vec<_>>());
    let external = ExternalSummary {
        per_model: summary,
        ensemble_combined: ci(Head::Combined)?,
        ensemble_image: ci(Head::Image)?,
        ensemble_biomarker: ci(Head::Biomarker)?,
        ensemble_predictions,
    };
    Ok(ExperimentReport {
        kind: ExperimentKind::ExternalValidation,
        label: config.model.label(),
        training_subset: TrainingSubset::All,
        config: config.clone(),
        seeds: ExperimentSeeds {
            master: config.seed,
            split: split_seed,
            folds: folds.iter().map(|f| f.seeds).collect(),
        },
        folds,
        summary,
        pooled: None,
        external: Some(external),
        predictions,
    })
}
