use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypertrees"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn ar_config() -> String {
    configs().join("air_passengers_ar.toml").display().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn same_seed_gives_identical_bundles() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = configs().join("air_passengers_treenet.toml").display().to_string();
    for out in ["a", "b"] {
        ok(d, &["train", "--config", &cfg, "--set", "boosting.rounds=10", "--out", out]);
    }
    let mut names: Vec<_> = fs::read_dir(d.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(fs::read(d.join("a").join(&n)).unwrap(), fs::read(d.join("b").join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn missing_data_path_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.toml", "[model]\nfamily = \"hypertree\"\n");
    let out = run(dir.path(), &["train", "--config", "c.toml", "--out", "b"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.path"));
    assert!(!dir.path().join("b").exists());
}

#[test]
fn training_logs_one_row_per_round() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["train", "--config", &ar_config(), "--out", "b", "--log", "timing.csv"]);
    let log = read(d, "b/training_log.csv");
    assert_eq!(log.lines().count(), 1 + 101);
    assert!(log.starts_with("round,loss\n0,"));
    let timing = read(d, "timing.csv");
    assert_eq!(timing.lines().count(), 1 + 100);
    assert!(timing.starts_with("round,loss,seconds\n1,"));
}

#[test]
fn untrained_ar_bundle_forecasts_zeros() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["train", "--config", &ar_config(), "--set", "boosting.rounds=0", "--out", "b"]);
    ok(d, &["forecast", "--bundle", "b", "--out", "fc.csv"]);
    let fc = read(d, "fc.csv");
    let rows: Vec<&str> = fc.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.ends_with(",0")));
    assert!(rows[0].starts_with("air_passengers,1960-01-01,"));
}

#[test]
fn evaluate_examples() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "y.csv", "series_id,timestamp,value\na,2020-01-01,10\na,2020-02-01,20\n");
    write(d, "f.csv", "series_id,timestamp,value\na,2020-01-01,12\na,2020-02-01,18\n");
    write(d, "r.csv", "series_id,timestamp,value\na,2020-01-01,11\na,2020-02-01,25\n");
    ok(d, &["evaluate", "--forecast", "y.csv", "--actuals", "y.csv", "--reference", "r.csv", "--out", "perfect.csv"]);
    let perfect = read(d, "perfect.csv");
    let mean = perfect.lines().last().unwrap();
    assert_eq!(mean, "dataset,model,MEAN,0,0,0,0,0,0,");

    ok(d, &["evaluate", "--forecast", "f.csv", "--actuals", "y.csv", "--reference", "f.csv", "--out", "same.csv"]);
    assert!(read(d, "same.csv").lines().last().unwrap().ends_with(",1,"));

    write(d, "g.csv", "series_id,timestamp,value\nb,2020-01-01,12\nb,2020-02-01,18\n");
    let out = run(d, &["evaluate", "--forecast", "g.csv", "--actuals", "y.csv", "--out", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("series 'b'"));
}

#[test]
fn export_covers_both_phases() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["train", "--config", &ar_config(), "--set", "boosting.rounds=5", "--out", "b"]);
    ok(d, &["export", "--bundle", "b", "--what", "parameters", "--out", "p.csv"]);
    let text = read(d, "p.csv");
    let rows: Vec<&str> = text.lines().skip(1).collect();
    // 120 training rows with full lags plus 12 forecast rows, 12 names each.
    assert_eq!(rows.len(), (120 + 12) * 12);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",forecast")).count(), 12 * 12);
    let out = run(d, &["export", "--bundle", "b", "--what", "embeddings", "--out", "e.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_drift_is_reported() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = configs().join("csv_file_example.toml").display().to_string();
    ok(d, &["train", "--config", &cfg, "--set", "boosting.rounds=3", "--out", "b"]);
    write(d, "other.csv", "series_id,timestamp,value\nm01,2020-01-01,5\nm01,2020-02-01,6\nm01,2020-03-01,5\nm01,2020-04-01,6\nm01,2020-05-01,5\nm01,2020-06-01,6\nm01,2020-07-01,5\n");
    let out = run(d, &["forecast", "--bundle", "b", "--data", "other.csv", "--out", "fc.csv"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn unseen_category_warns_and_forecasts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = configs().join("csv_file_example.toml").display().to_string();
    ok(d, &["train", "--config", &cfg, "--set", "boosting.rounds=3", "--out", "b"]);
    let mut text = String::from("series_id,timestamp,value,region,price\n");
    for t in 0..24 {
        text.push_str(&format!("m01,{}-{:02}-01,{},atlantis,1.0\n", 2020 + t / 12, t % 12 + 1, 100 + t));
    }
    write(d, "new.csv", &text);
    let out = ok(d, &["forecast", "--bundle", "b", "--data", "new.csv", "--horizon", "3", "--out", "fc.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("atlantis"));
    assert_eq!(read(d, "fc.csv").lines().count(), 4);
}

#[test]
fn a9_and_bad_overrides_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["train", "--config", &ar_config(), "--set", "ablations.a9=true", "--out", "b"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["train", "--config", &ar_config(), "--set", "boosting.nope=1", "--out", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = configs().join("air_passengers_stl.toml").display().to_string();
    ok(d, &["decompose", "--config", &cfg, "--set", "boosting.rounds=10", "--out", "dec"]);
    assert_eq!(read(d, "dec/components.csv").lines().count(), 145);
    assert!(read(d, "dec/importance.csv").starts_with("output,feature,gain\ntrend_level,year,"));
    let out = run(d, &["decompose", "--config", &ar_config(), "--out", "dec2"]);
    assert_eq!(out.status.code(), Some(2));
}
