use std::fs;

use lotus::metastore::MetaStore;
use lotus_core::estimators::{Algorithm, ParamValue, PipelineSpec, TaskKind};
use lotus_core::metrics::{MetricName, MetricValue};
use lotus_core::store::StoreEntry;
use lotus_core::Matrix;
use proptest::prelude::*;

fn entry(id: &str, eps: f64, emb: Vec<f64>, score: f64) -> StoreEntry {
    StoreEntry {
        dataset_id: id.into(),
        task: TaskKind::Clustering,
        embedding: Matrix::from_vec(emb.len() / 2, 2, emb),
        pipeline: PipelineSpec::new(
            Algorithm::Dbscan,
            &[("eps", ParamValue::Real(eps)), ("min_samples", ParamValue::Int(3)), ("p", ParamValue::Int(2))],
        ),
        score: MetricValue::new(MetricName::Ami, score),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_is_lossless(
        eps in 1e-6f64..10.0,
        emb in prop::collection::vec(-1e6f64..1e6, 2..20).prop_map(|mut v| { v.truncate(v.len() / 2 * 2); v }),
        score in -1.0f64..1.0,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.jsonl");
        let e = entry("ds", eps, emb, score);
        let mut store = MetaStore::load(&path).unwrap();
        prop_assert!(store.record(&e).unwrap());
        let back = MetaStore::load(&path).unwrap().to_memory().unwrap();
        prop_assert_eq!(back.get(TaskKind::Clustering, "ds").unwrap(), &e);
    }
}

#[test]
fn missing_file_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let store = MetaStore::load(dir.path().join("none.jsonl")).unwrap();
    assert!(store.is_empty());
    assert!(store.warnings().is_empty());
}

#[test]
fn record_is_idempotent_and_last_write_wins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta.jsonl");
    let mut store = MetaStore::load(&path).unwrap();
    assert!(store.record(&entry("a", 0.5, vec![1.0, 2.0, 3.0, 4.0], 0.9)).unwrap());
    let bytes = fs::read(&path).unwrap();
    assert!(!store.record(&entry("a", 0.5, vec![1.0, 2.0, 3.0, 4.0], 0.9)).unwrap());
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert!(store.record(&entry("a", 0.7, vec![1.0, 2.0, 3.0, 4.0], 0.95)).unwrap());

    let reloaded = MetaStore::load(&path).unwrap();
    assert_eq!(reloaded.len(), 1);
    let e = reloaded.get(TaskKind::Clustering, "a").unwrap();
    assert_eq!(e.pipeline.params["eps"], ParamValue::Real(0.7));
    assert_eq!(e.embedding_path, "embeddings/a.csv");
    assert_eq!(e.metric_name, MetricName::Ami);
}

#[test]
fn malformed_lines_are_skipped_with_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta.jsonl");
    let mut store = MetaStore::load(&path).unwrap();
    store.record(&entry("good", 0.5, vec![0.0, 1.0], 0.5)).unwrap();
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    text.push_str("{\"dataset_id\": \"x\"}\n");
    fs::write(&path, text).unwrap();

    let store = MetaStore::load(&path).unwrap();
    assert_eq!(store.len(), 1);
    assert_eq!(store.warnings().len(), 2);
    assert!(store.warnings()[0].starts_with("line 2:"), "{:?}", store.warnings());
    assert!(store.warnings()[1].starts_with("line 3:"));
}

#[test]
fn ids_that_escape_the_store_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = MetaStore::load(dir.path().join("meta.jsonl")).unwrap();
    assert!(store.record(&entry("../x", 0.5, vec![0.0, 1.0], 0.5)).is_err());
    assert!(store.is_empty());
}
