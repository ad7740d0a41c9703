use std::collections::HashSet;

use m3net_core::data::{
    compute_normalization, generate_synthetic_cohort, kfold_split, load_cohort, parse_cohort,
    split_train_val, strata_counts, write_cohort, CohortSchema, LoadOptions, SubjectRecord, SynthConfig,
};
use m3net_core::training::{train, TrainConfig};
use proptest::prelude::*;

fn small_synth(n: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n,
        seed,
        image_feature_width: 16,
        biomarker_width: 4,
        blood_index: 0,
        mayo_index: 3,
        ..SynthConfig::default()
    }
}

fn opts(cfg: &SynthConfig) -> LoadOptions {
    LoadOptions { schema: cfg.schema(), allow_no_modality: false }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn write_then_load_is_identity(seed in any::<u64>(), n in 5usize..80) {
        let cfg = small_synth(n, seed);
        let cohort = generate_synthetic_cohort(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_cohort(&path, &cohort).unwrap();
        prop_assert_eq!(load_cohort(&path, &opts(&cfg)).unwrap(), cohort);
    }
}

proptest! {
    #[test]
    fn stratum_counts_are_exact(
        n in 1usize..3000,
        w in proptest::collection::vec(0u32..100, 3),
    ) {
        let total: u32 = w.iter().sum();
        prop_assume!(total > 0);
        let image_only = w[1] as f64 / total as f64;
        let bio_only = w[2] as f64 / total as f64;
        let cfg = SynthConfig {
            n,
            frac_both: 1.0 - image_only - bio_only,
            frac_image_only: image_only,
            frac_bio_only: bio_only,
            ..small_synth(n, 1)
        };
        prop_assume!(cfg.validate().is_ok());
        let counts = strata_counts(&generate_synthetic_cohort(&cfg).unwrap());
        let floor = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
        prop_assert_eq!(counts.image_only, floor(image_only));
        prop_assert_eq!(counts.bio_only, floor(bio_only));
        prop_assert_eq!(counts.both, n - floor(image_only) - floor(bio_only));
        prop_assert_eq!(counts.neither, 0);
    }

    #[test]
    fn folds_partition_the_cohort(n in 5usize..400, seed in any::<u64>(), stratify in any::<bool>()) {
        let cohort = generate_synthetic_cohort(&small_synth(n, seed)).unwrap();
        let split = kfold_split(&cohort, 5, seed, stratify).unwrap();
        let sizes = split.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut seen = vec![0; n];
        for f in 0..5 {
            for i in split.members(f) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|c| *c == 1));
    }

    #[test]
    fn no_subject_takes_two_roles(n in 10usize..300, seed in any::<u64>()) {
        let cohort = generate_synthetic_cohort(&small_synth(n, seed)).unwrap();
        let split = kfold_split(&cohort, 5, seed, false).unwrap();
        for f in 0..5 {
            let test = split.members(f);
            let (tr, va) = split_train_val(&split.complement(f), seed.wrapping_add(f as u64));
            let ids = |idx: &[usize]| idx.iter().map(|&i| cohort[i].id.clone()).collect::<HashSet<_>>();
            let (t, a, v) = (ids(&test), ids(&tr), ids(&va));
            prop_assert!(t.is_disjoint(&a) && t.is_disjoint(&v) && a.is_disjoint(&v));
            prop_assert_eq!(t.len() + a.len() + v.len(), n);
            prop_assert_eq!(a.len(), (3 * (n - test.len()) + 2) / 4);
        }
    }
}

#[test]
fn default_cohort_strata_and_fold_sizes() {
    let cohort = generate_synthetic_cohort(&SynthConfig::default()).unwrap();
    let c = strata_counts(&cohort);
    assert_eq!((cohort.len(), c.both, c.image_only, c.bio_only), (1232, 383, 647, 202));
    let split = kfold_split(&cohort, 5, 0, false).unwrap();
    let mut sizes = split.sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(sizes, vec![247, 247, 246, 246, 246]);
}

#[test]
fn all_complete_when_requested() {
    let cfg = SynthConfig { frac_both: 1.0, frac_image_only: 0.0, frac_bio_only: 0.0, ..small_synth(100, 4) };
    assert!(generate_synthetic_cohort(&cfg).unwrap().iter().all(SubjectRecord::is_complete));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig::default();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_cohort(&a, &generate_synthetic_cohort(&cfg).unwrap()).unwrap();
    write_cohort(&b, &generate_synthetic_cohort(&cfg).unwrap()).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn train_val_arithmetic() {
    let idx: Vec<usize> = (0..400).collect();
    let (t, v) = split_train_val(&idx, 3);
    assert_eq!((t.len(), v.len()), (300, 100));
    assert_eq!(split_train_val(&idx, 3), (t, v));
    let idx: Vec<usize> = (0..401).collect();
    let (t, v) = split_train_val(&idx, 3);
    assert_eq!((t.len(), v.len()), (301, 100));
}

fn tiny_schema() -> LoadOptions {
    LoadOptions {
        schema: CohortSchema { biomarker_width: 2, image_feature_width: 2, bag_capacity: 5 },
        allow_no_modality: false,
    }
}

#[test]
fn three_nodules_pad_to_five_rows() {
    let text = r#"{"id":"a","label":1,"biomarkers":[1,2],"image_features":[[1,1],[2,2],[3,3]],"num_nodules":3}
{"id":"b","label":0,"biomarkers":[0.5,0.25],"image_features":null}
{"id":"c","label":0,"biomarkers":null,"image_features":[[4,5]],"num_nodules":1,"site":"X"}
"#;
    let records = parse_cohort(text, &tiny_schema()).unwrap();
    assert_eq!(records.len(), 3);
    let bag = records[0].image_bag.as_ref().unwrap();
    assert_eq!((bag.rows(), bag.real_count()), (5, 3));
    assert_eq!(bag.row(2), &[3.0, 3.0]);
    assert!(bag.row(3).iter().chain(bag.row(4)).all(|v| *v == 0.0));
}

#[test]
fn ingestion_errors_name_the_problem() {
    let short = r#"{"id":"a","label":1,"biomarkers":[1],"image_features":null}"#;
    let e = parse_cohort(short, &tiny_schema()).unwrap_err().to_string();
    assert!(e.contains("biomarkers") && e.contains("line 1"), "{e}");

    let empty_bag = r#"{"id":"zz","label":1,"biomarkers":null,"image_features":[],"num_nodules":0}"#;
    assert!(parse_cohort(empty_bag, &tiny_schema()).unwrap_err().to_string().contains("zz"));

    let neither = r#"{"id":"nn","label":0,"biomarkers":null,"image_features":null}"#;
    assert!(parse_cohort(neither, &tiny_schema()).unwrap_err().to_string().contains("nn"));

    let dup = "{\"id\":\"d\",\"label\":0,\"biomarkers\":[1,2]}\n{\"id\":\"d\",\"label\":1,\"biomarkers\":[1,2]}";
    let e = parse_cohort(dup, &tiny_schema()).unwrap_err().to_string();
    assert!(e.contains("line 2") && e.contains("duplicate"), "{e}");

    let garbage = "{\"id\":\"ok\",\"label\":0,\"biomarkers\":[1,2]}\nnot json";
    assert!(parse_cohort(garbage, &tiny_schema()).unwrap_err().to_string().contains("line 2"));
}

fn bio_record(id: &str, b: [f64; 2]) -> SubjectRecord {
    SubjectRecord { id: id.into(), label: 0, biomarkers: Some(b.to_vec()), image_bag: None, site: None }
}

#[test]
fn normalization_arithmetic() {
    let rs = [bio_record("a", [1.0, 5.0]), bio_record("b", [2.0, 5.0]), bio_record("c", [3.0, 5.0])];
    let refs: Vec<&SubjectRecord> = rs.iter().collect();
    let stats = compute_normalization(&refs).unwrap();
    let bio = stats.biomarker.as_ref().unwrap();
    assert_eq!(bio.mean, vec![2.0, 5.0]);
    assert!((bio.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(bio.std[1], 0.0);
    assert!(stats.image.is_none());
    let held_out = stats.apply(&bio_record("x", [2.0, 9.0])).unwrap();
    assert_eq!(held_out.biomarkers.unwrap(), vec![0.0, 0.0]);
}

#[test]
fn training_uses_train_only_statistics() {
    let cfg = small_synth(120, 9);
    let cohort = generate_synthetic_cohort(&cfg).unwrap();
    let (tr, va) = split_train_val(&(0..80).collect::<Vec<_>>(), 1);
    let train_set: Vec<&SubjectRecord> = tr.iter().map(|&i| &cohort[i]).collect();
    let val_set: Vec<&SubjectRecord> = va.iter().map(|&i| &cohort[i]).collect();
    // shifted held-out subjects would move the statistics if they leaked in
    let shifted: Vec<SubjectRecord> = cohort[80..]
        .iter()
        .map(|r| SubjectRecord {
            biomarkers: r.biomarkers.as_ref().map(|b| b.iter().map(|v| v + 100.0).collect()),
            ..r.clone()
        })
        .collect();

    let config = TrainConfig {
        model: m3net_core::ModelConfig {
            image_feature_width: 16,
            biomarker_width: 4,
            mayo_index: 3,
            ..Default::default()
        },
        epochs: 1,
        ..TrainConfig::default()
    };
    let checkpoint = train(&train_set, &val_set, &config).unwrap();
    assert_eq!(checkpoint.normalization, compute_normalization(&train_set).unwrap());

    let mut leaky = train_set.clone();
    leaky.extend(shifted.iter());
    assert_ne!(checkpoint.normalization, compute_normalization(&leaky).unwrap());
}
