use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn m3net(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m3net"))
        .args(args)
        .current_dir(dir)
        .env_remove("M3NET_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

#[test]
fn synth_writes_the_default_cohort_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--out", "a.jsonl"], dir.path()));
    ok(m3net(&["synth", "--out", "b.jsonl"], dir.path()));
    let a = fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a.lines().count(), 1232);
    assert_eq!(a, fs::read_to_string(dir.path().join("b.jsonl")).unwrap());
}

#[test]
fn synth_all_complete() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--n", "50", "--frac-both", "1.0", "--out", "c.jsonl"], dir.path()));
    let text = fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["biomarkers"].is_array() && v["image_features"].is_array(), "{line}");
    }
}

#[test]
fn cv_tags_reports_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--n", "150", "--out", "c.jsonl"], dir.path()));
    let o = ok(m3net(
        &["cv", "c.jsonl", "--variant", "m3net2", "--dim", "5", "--epochs", "2", "--out-dir", "out"],
        dir.path(),
    ));
    assert!(stdout(&o).contains("M3Net2 (Dim=5)"), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/cv-m3net2-dim5.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["label"], "M3Net2 (Dim=5)");
    assert_eq!(json["run_config"]["epochs"], 2);
    assert_eq!(json["report"]["folds"].as_array().unwrap().len(), 5);
    assert!(json["report"]["seeds"]["split"].is_u64());
    assert!(dir.path().join("out/cv-m3net2-dim5.txt").exists());
}

#[test]
fn cv_dim_sweep_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--n", "150", "--out", "c.jsonl"], dir.path()));
    ok(m3net(
        &["cv", "c.jsonl", "--variant", "m3net2", "--dim-sweep", "1,3", "--epochs", "1", "--out-dir", "sweep"],
        dir.path(),
    ));
    for dim in [1, 3] {
        assert!(dir.path().join(format!("sweep/cv-m3net2-dim{dim}.json")).exists());
    }
    let o = ok(m3net(
        &["cv", "c.jsonl", "--baseline", "complete-only", "--epochs", "1", "--out-dir", "base"],
        dir.path(),
    ));
    assert!(stdout(&o).contains("complete-only"), "{}", stdout(&o));
    assert!(dir.path().join("base/cv-m3net1-complete-only.json").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "n = 40\nfrac_both = 1.0\ncohort_seed = 3\n").unwrap();
    ok(m3net(&["--config", "run.toml", "synth", "--out", "a.jsonl"], dir.path()));
    ok(m3net(&["--config", "run.toml", "--n", "30", "synth", "--out", "b.jsonl"], dir.path()));
    assert_eq!(fs::read_to_string(dir.path().join("a.jsonl")).unwrap().lines().count(), 40);
    assert_eq!(fs::read_to_string(dir.path().join("b.jsonl")).unwrap().lines().count(), 30);

    let via_env = Command::new(env!("CARGO_BIN_EXE_m3net"))
        .args(["synth", "--out", "e.jsonl"])
        .current_dir(dir.path())
        .env("M3NET_CONFIG", "run.toml")
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(
        fs::read(dir.path().join("e.jsonl")).unwrap(),
        fs::read(dir.path().join("a.jsonl")).unwrap()
    );
}

#[test]
fn exit_codes_separate_config_data_and_check_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = m3net(&["cv", "nope.jsonl"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("nope.jsonl"), "{}", stderr(&missing));

    fs::write(dir.path().join("bad.toml"), "epochz = 3\n").unwrap();
    let unknown = m3net(&["--config", "bad.toml", "synth", "--out", "x.jsonl"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("epochz"), "{}", stderr(&unknown));

    let invalid = m3net(&["--folds", "1", "synth", "--out", "x.jsonl"], dir.path());
    assert_eq!(invalid.status.code(), Some(2));

    fs::write(dir.path().join("broken.jsonl"), "{\"id\":\"a\",\"label\":7}\n").unwrap();
    let broken = m3net(&["cv", "broken.jsonl"], dir.path());
    assert_eq!(broken.status.code(), Some(3));
    assert!(stderr(&broken).contains("line 1"), "{}", stderr(&broken));
}

#[test]
fn extval_requires_complete_test_subjects_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--n", "150", "--out", "train.jsonl"], dir.path()));
    ok(m3net(
        &["synth", "--n", "30", "--frac-both", "1.0", "--cohort-seed", "5", "--id-prefix", "X", "--out", "test.jsonl"],
        dir.path(),
    ));
    let args = ["extval", "train.jsonl", "test.jsonl", "--epochs", "2", "--bootstrap-resamples", "200"];
    ok(m3net(&[&args[..], &["--out-dir", "a"]].concat(), dir.path()));
    ok(m3net(&[&args[..], &["--out-dir", "b"]].concat(), dir.path()));
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("extval-m3net1.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    let json: serde_json::Value = serde_json::from_str(&read("a")).unwrap();
    assert!(json["report"]["external"]["ensemble_combined"]["ci_low"].is_number());
    assert!(json["report"]["summary"]["combined"]["std"].is_number());

    // swapped roles: the first incomplete training subject must be named
    let first_incomplete = fs::read_to_string(dir.path().join("train.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["biomarkers"].is_null() || v["image_features"].is_null())
        .unwrap()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    let bad = m3net(&["extval", "test.jsonl", "train.jsonl", "--epochs", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains(&format!("subject {first_incomplete}")), "{}", stderr(&bad));
}

fn stripped(line: &str, drop: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
    v[drop] = serde_json::Value::Null;
    if drop == "image_features" {
        v.as_object_mut().unwrap().remove("num_nodules");
    }
    v.to_string()
}

#[test]
fn predict_routes_each_subject_and_flags_unpredictable_ones() {
    let dir = tempfile::tempdir().unwrap();
    ok(m3net(&["synth", "--n", "120", "--out", "c.jsonl"], dir.path()));
    ok(m3net(&["train", "c.jsonl", "--epochs", "2", "--model-out", "model.json"], dir.path()));

    let complete = fs::read_to_string(dir.path().join("c.jsonl"))
        .unwrap()
        .lines()
        .find(|l| !l.contains("\"biomarkers\":null") && !l.contains("\"image_features\":null"))
        .unwrap()
        .to_owned();
    let image_only = stripped(&complete, "biomarkers").replacen("\"id\":\"", "\"id\":\"img-", 1);
    let bio_only = stripped(&complete, "image_features").replacen("\"id\":\"", "\"id\":\"bio-", 1);
    let neither = r#"{"id":"empty","label":0,"biomarkers":null,"image_features":null}"#;
    fs::write(
        dir.path().join("mixed.jsonl"),
        [complete.as_str(), &image_only, &bio_only, neither].join("\n"),
    )
    .unwrap();

    let o = ok(m3net(&["predict", "model.json", "mixed.jsonl", "--out", "p.csv"], dir.path()));
    assert!(stderr(&o).contains("unpredictable: empty"));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let paths: Vec<&str> = rows.iter().map(|r| r[3]).collect();
    assert_eq!(paths, ["combined", "image", "biomarker", "unpredictable"]);
    assert!(rows[3][2].is_empty());
    assert!(rows[..3].iter().all(|r| r[2].parse::<f64>().is_ok()));

    fs::write(dir.path().join("hopeless.jsonl"), neither).unwrap();
    let all_fail = m3net(&["predict", "model.json", "hopeless.jsonl"], dir.path());
    assert_eq!(all_fail.status.code(), Some(3));
}

#[test]
fn stats_formats_intervals_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut separated = String::from("id,label,risk,path\n");
    let mut noisy = separated.clone();
    for i in 0..40 {
        let label = i % 2;
        separated.push_str(&format!("s{i},{label},{},combined\n", 0.1 + 0.8 * label as f64 + i as f64 * 1e-3));
        noisy.push_str(&format!("s{i},{label},{},combined\n", ((i * 37) % 40) as f64 / 40.0));
    }
    fs::write(dir.path().join("a.csv"), &separated).unwrap();
    fs::write(dir.path().join("b.csv"), &noisy).unwrap();

    let o = ok(m3net(&["stats", "a.csv"], dir.path()));
    assert_eq!(stdout(&o).trim(), "a.csv: AUC 1.000 (1.000-1.000)");

    let o = ok(m3net(&["stats", "a.csv", "a.csv"], dir.path()));
    assert!(stdout(&o).contains("p = 1.0000"), "{}", stdout(&o));

    let ab = ok(m3net(&["stats", "a.csv", "b.csv", "--json"], dir.path()));
    let ba = ok(m3net(&["stats", "b.csv", "a.csv", "--json"], dir.path()));
    let p = |o: &Output| serde_json::from_str::<serde_json::Value>(&stdout(o)).unwrap()["p_two_tailed"].as_f64().unwrap();
    assert_eq!(p(&ab), p(&ba));
    assert!(p(&ab) < 0.05);
}

fn max_error(out: &str) -> f64 {
    out.lines()
        .filter_map(|l| l.split("max relative error ").nth(1))
        .map(|rest| rest.split_whitespace().next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn gradcheck_passes_and_its_controls_fail() {
    let dir = tempfile::tempdir().unwrap();
    let pass = ok(m3net(&["gradcheck"], dir.path()));
    let text = stdout(&pass);
    assert!(text.contains("gradcheck: 12/12"), "{text}");
    assert!(max_error(&text) < 1e-4);

    let corrupt = m3net(&["gradcheck", "--dims", "5", "--corrupt-gradient"], dir.path());
    assert_eq!(corrupt.status.code(), Some(4));
    assert!(stdout(&corrupt).contains("FAIL"));

    let coarse = m3net(&["gradcheck", "--dims", "5", "--h", "1e-2"], dir.path());
    assert!(max_error(&stdout(&coarse)) > 10.0 * max_error(&text), "{}", stdout(&coarse));
}
