use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lotus(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lotus"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LOTUS_SEED")
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Two small labeled CSVs with a categorical column and a missing cell.
fn write_data(dir: &Path) {
    fs::create_dir_all(dir.join("data")).unwrap();
    for (name, shift) in [("alpha", 0.0), ("beta", 3.0)] {
        let mut text = String::from("x,y,kind,label\n");
        for i in 0..30 {
            let k = i % 3;
            let x = k as f64 * 5.0 + ((i * 37) % 11) as f64 / 10.0 + shift;
            let y = if i == 4 { String::new() } else { format!("{}", ((i * 53) % 17) as f64 / 4.0 - k as f64) };
            let kind = ["red", "green"][i % 2];
            text.push_str(&format!("{x},{y},{kind},{k}\n"));
        }
        fs::write(dir.join("data").join(format!("{name}.csv")), text).unwrap();
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lotus(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn empty_store_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let out = lotus(
        &["recommend", "--input", "data/alpha.csv", "--store", "nowhere.jsonl", "--task", "clustering"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.jsonl"));
}

#[test]
fn meta_train_then_recommend_returns_stored_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let summary = ok_json(&lotus(
        &["meta-train", "--data", "data", "--task", "clustering", "--store", "store/meta.jsonl", "--budget", "5"],
        dir.path(),
    ));
    assert_eq!(summary["written"], serde_json::json!(["alpha", "beta"]));
    assert_eq!(summary["config"]["budget"], 5);
    assert!(summary["toolkit_version"].is_string());
    assert!(dir.path().join("store/embeddings/alpha.csv").exists());

    let rec = ok_json(&lotus(
        &["recommend", "--input", "data/beta.csv", "--store", "store/meta.jsonl", "--task", "clustering"],
        dir.path(),
    ));
    assert_eq!(rec["source_dataset"], "beta");
    let line = fs::read_to_string(dir.path().join("store/meta.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|e| e["dataset_id"] == "beta")
        .unwrap();
    assert_eq!(rec["pipeline"], line["pipeline"]);
    assert!(rec["distance"].as_f64().unwrap() >= 0.0);
    assert!(rec["timings"]["total_seconds"].is_number());
}

#[test]
fn meta_train_output_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    for store in ["s1/meta.jsonl", "s2/meta.jsonl"] {
        ok_json(&lotus(
            &["meta-train", "--data", "data", "--task", "clustering", "--store", store, "--budget", "4"],
            dir.path(),
        ));
    }
    for rel in ["meta.jsonl", "embeddings/alpha.csv", "embeddings/beta.csv"] {
        assert_eq!(
            fs::read(dir.path().join("s1").join(rel)).unwrap(),
            fs::read(dir.path().join("s2").join(rel)).unwrap(),
            "{rel}"
        );
    }
    // a rerun into the same store leaves it untouched
    let before = fs::read(dir.path().join("s1/meta.jsonl")).unwrap();
    let again = ok_json(&lotus(
        &["meta-train", "--data", "data", "--task", "clustering", "--store", "s1/meta.jsonl", "--budget", "4"],
        dir.path(),
    ));
    assert_eq!(again["written"], serde_json::json!([]));
    assert_eq!(fs::read(dir.path().join("s1/meta.jsonl")).unwrap(), before);
}

#[test]
fn evaluate_output_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    for (out, threads) in [("r1", "1"), ("r2", "3")] {
        let v = ok_json(&lotus(
            &["evaluate", "--data", "data", "--task", "clustering", "--out", out, "--budget", "3", "--threads", threads],
            dir.path(),
        ));
        assert_eq!(v["files"].as_array().unwrap().len(), 5);
    }
    for name in ["scores.csv", "ranks.csv", "rope.csv", "folds.csv", "summary.md"] {
        assert_eq!(
            fs::read(dir.path().join("r1").join(name)).unwrap(),
            fs::read(dir.path().join("r2").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_falls_back_to_environment_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let run = |extra: &[&str]| {
        let mut args = vec!["distance", "--a", "data/alpha.csv", "--b", "data/beta.csv"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_lotus"))
            .args(&args)
            .current_dir(dir.path())
            .env("LOTUS_SEED", "41")
            .output()
            .unwrap()
    };
    let a = ok_json(&run(&[]));
    let b = ok_json(&run(&["--seed", "41"]));
    assert_eq!(a["value"], b["value"]);
    assert_eq!(a["candidate_id"], "beta");
    assert!(a["solver_converged"].is_boolean());
    assert!(a["wall_time"].is_number());
}

#[test]
fn distance_with_entropic_solver() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let v = ok_json(&lotus(
        &["distance", "--a", "data/alpha.csv", "--b", "data/alpha.csv", "--solver", "entropic"],
        dir.path(),
    ));
    assert!(v["value"].as_f64().unwrap() < 1e-2, "{v}");
}

#[test]
fn ingest_writes_numeric_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    let v = ok_json(&lotus(&["ingest", "--input", "data/alpha.csv", "--output", "enc.csv"], dir.path()));
    assert_eq!(v["rows"], 30);
    assert_eq!(v["labels"], true);
    let text = fs::read_to_string(dir.path().join("enc.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with(",label"), "{header}");
    assert_eq!(text.lines().count(), 31);
    for line in text.lines().skip(1) {
        for cell in line.split(',') {
            cell.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn bad_config_file_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path());
    fs::write(dir.path().join("bad.conf"), "rope = 2\n").unwrap();
    let out = lotus(
        &["--config", "bad.conf", "distance", "--a", "data/alpha.csv", "--b", "data/beta.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rope"));
}
