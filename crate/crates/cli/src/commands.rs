use std::fs;
use std::path::Path;

use m3net_core::artifact::ModelArtifact;
use m3net_core::data::{
    generate_synthetic_cohort, load_cohort, split_train_val, strata_counts, write_cohort, CohortSchema,
    LoadOptions, SubjectRecord,
};
use m3net_core::diagnostics::{check_model_gradients, GradCheckOptions, Situation};
use m3net_core::seed::{derive_seed, STREAM_SPLIT};
use m3net_core::stats::{bootstrap_ci, bootstrap_pvalue};
use m3net_core::training::{
    cross_validate, external_validate, render_table, run_baseline_complete_only, train as train_model,
    ExperimentReport, TrainConfig, TrainingSubset,
};
use m3net_core::{Error, ModelConfig, Variant};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::predictions::{self, PredictionRow};

/// Report file: the experiment plus the effective run configuration.
#[derive(Serialize)]
struct ReportFile<'a> {
    run_config: &'a RunConfig,
    report: &'a ExperimentReport,
}

fn load(path: &Path, model: &ModelConfig, lenient: bool) -> CliResult<Vec<SubjectRecord>> {
    let opts = LoadOptions {
        schema: CohortSchema::from(model),
        allow_no_modality: lenient,
    };
    Ok(load_cohort(path, &opts)?)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

/// File stem for a report, e.g. `cv-m3net2-dim5-complete-only`.
fn stem(prefix: &str, r: &ExperimentReport) -> String {
    let m = &r.config.model;
    let mut s = format!("{prefix}-{}", m.variant);
    if m.variant == Variant::M3Net2 {
        s.push_str(&format!("-dim{}", m.dim));
    }
    if r.training_subset == TrainingSubset::CompleteOnly {
        s.push_str("-complete-only");
    }
    s
}

fn emit(config: &RunConfig, prefix: &str, out_dir: &Path, reports: &[ExperimentReport]) -> CliResult<()> {
    ensure_dir(out_dir)?;
    for r in reports {
        let stem = stem(prefix, r);
        let json = serde_json::to_string_pretty(&ReportFile { run_config: config, report: r })
            .map_err(Error::from)?;
        write_text(&out_dir.join(format!("{stem}.json")), &(json + "\n"))?;
        write_text(&out_dir.join(format!("{stem}.txt")), &render_table(&[r]))?;
        eprintln!("wrote {}", out_dir.join(format!("{stem}.json")).display());
    }
    let refs: Vec<&ExperimentReport> = reports.iter().collect();
    print!("{}", render_table(&refs));
    Ok(())
}

pub fn synth(config: &RunConfig, out: &Path) -> CliResult<()> {
    let cohort = generate_synthetic_cohort(&config.synth())?;
    write_cohort(out, &cohort)?;
    let s = strata_counts(&cohort);
    eprintln!(
        "wrote {} subjects to {} (both {}, image-only {}, biomarker-only {})",
        cohort.len(),
        out.display(),
        s.both,
        s.image_only,
        s.bio_only
    );
    Ok(())
}

pub fn cv(
    config: &RunConfig,
    cohort_path: &Path,
    out_dir: &Path,
    complete_only: bool,
    dim_sweep: Option<&[usize]>,
) -> CliResult<()> {
    let base = config.train();
    let cohort = load(cohort_path, &base.model, false)?;
    let dims: Vec<usize> = dim_sweep.map_or_else(|| vec![config.dim], <[usize]>::to_vec);
    if dims.is_empty() {
        return Err(CliError::Config("--dim-sweep needs at least one dim".into()));
    }
    let mut reports = Vec::new();
    for dim in dims {
        let mut run = config.clone();
        run.dim = dim;
        let train: TrainConfig = run.train();
        train.validate()?;
        let report = if complete_only {
            run_baseline_complete_only(&cohort, &train)?
        } else {
            cross_validate(&cohort, &train)?
        };
        reports.push(report);
    }
    emit(config, "cv", out_dir, &reports)
}

pub fn extval(config: &RunConfig, train_path: &Path, test_path: &Path, out_dir: &Path) -> CliResult<()> {
    let train = config.train();
    let train_cohort = load(train_path, &train.model, false)?;
    let test_cohort = load(test_path, &train.model, false)?;
    let report = external_validate(&train_cohort, &test_cohort, &train, &config.bootstrap())?;
    emit(config, "extval", out_dir, &[report])
}

pub fn train(config: &RunConfig, cohort_path: &Path, model_out: &Path) -> CliResult<()> {
    let tc = config.train();
    let cohort = load(cohort_path, &tc.model, false)?;
    let indices: Vec<usize> = (0..cohort.len()).collect();
    let (tr, va) = split_train_val(&indices, derive_seed(tc.seed, STREAM_SPLIT));
    let refs = |idx: &[usize]| idx.iter().map(|&i| &cohort[i]).collect::<Vec<_>>();
    let ckpt = train_model(&refs(&tr), &refs(&va), &tc)?;
    ModelArtifact::from_checkpoint(&ckpt)?.save(model_out)?;
    println!(
        "{}: trained on {} subjects, best epoch {} with validation AUC {:.4}; saved {}",
        tc.model.label(),
        tr.len(),
        ckpt.epoch,
        ckpt.val_auc,
        model_out.display()
    );
    Ok(())
}

pub fn predict(model_path: &Path, cohort_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let trained = ModelArtifact::load(model_path)?.to_trained()?;
    let cohort = load(cohort_path, trained.model.config(), true)?;
    let mut rows = Vec::with_capacity(cohort.len());
    let mut failed = 0;
    for r in &cohort {
        match trained.predict(r) {
            Ok((risk, source)) => rows.push(PredictionRow {
                id: r.id.clone(),
                label: Some(r.label),
                risk: Some(risk),
                path: source.as_str().into(),
            }),
            Err(Error::NoUsableModality) => {
                eprintln!("unpredictable: {} (neither modality present)", r.id);
                failed += 1;
                rows.push(PredictionRow {
                    id: r.id.clone(),
                    label: Some(r.label),
                    risk: None,
                    path: "unpredictable".into(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !cohort.is_empty() && failed == cohort.len() {
        return Err(CliError::Data("no subject could be scored".into()));
    }
    match out {
        Some(p) => predictions::write(p, &rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| CliError::Data(e.to_string()))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    n: usize,
    auc_a: m3net_core::stats::BootstrapResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc_b: Option<m3net_core::stats::BootstrapResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_two_tailed: Option<f64>,
}

pub fn stats(config: &RunConfig, a: &Path, b: Option<&Path>, labels: Option<&Path>, json: bool) -> CliResult<()> {
    let labels = labels.map(predictions::read_labels).transpose()?;
    let boot = config.bootstrap();
    let set_a = predictions::score_set(&predictions::read(a)?, labels.as_ref())?;
    let ci_a = bootstrap_ci(&set_a, &boot)?;
    let (ci_b, p) = match b {
        Some(b) => {
            let set_b = predictions::score_set(&predictions::read(b)?, labels.as_ref())?;
            let set_b = predictions::align(&set_a, &set_b)?;
            let ci_b = bootstrap_ci(&set_b, &boot)?;
            (Some(ci_b), Some(bootstrap_pvalue(&set_a, &set_b, &boot)?))
        }
        None => (None, None),
    };
    if json {
        let out = StatsOutput {
            n: set_a.len(),
            auc_a: ci_a,
            auc_b: ci_b,
            p_two_tailed: p,
        };
        println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
        return Ok(());
    }
    println!("{}: AUC {}", a.display(), ci_a.formatted());
    if let (Some(b), Some(ci_b), Some(p)) = (b, ci_b, p) {
        println!("{}: AUC {}", b.display(), ci_b.formatted());
        println!("paired bootstrap two-tailed p = {p:.4} ({} resamples, n = {})", boot.n_resamples, set_a.len());
    }
    Ok(())
}

pub fn gradcheck(config: &RunConfig, h: f64, tolerance: f64, dims: &[usize], corrupt: Option<f64>) -> CliResult<()> {
    let mut cases = vec![ModelConfig {
        variant: Variant::M3Net1,
        ..config.model()
    }];
    cases.extend(dims.iter().map(|&dim| ModelConfig {
        variant: Variant::M3Net2,
        dim,
        ..config.model()
    }));
    let opts = GradCheckOptions {
        step: h,
        seed: config.seed,
        perturb_analytic: corrupt,
        ..GradCheckOptions::default()
    };
    let (mut passed, mut total) = (0, 0);
    for model in &cases {
        for situation in Situation::ALL {
            let r = check_model_gradients(model, situation, &opts)?;
            let ok = r.max_relative_error < tolerance;
            total += 1;
            passed += usize::from(ok);
            println!(
                "{:<16} {:<10} max relative error {:.3e} (tensor {}, worst entry {:.3e})  {}",
                model.label(),
                situation.as_str(),
                r.max_relative_error,
                m3net_core::model::M3NetParams::names()[r.worst_tensor],
                r.max_entry_error,
                if ok { "pass" } else { "FAIL" }
            );
        }
    }
    println!("gradcheck: {passed}/{total} below {tolerance:e} (h = {h:e})");
    if passed == total {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} of {total} gradient checks failed", total - passed)))
    }
}
