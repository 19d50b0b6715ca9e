use lotus_core::dataset::standardize_matrix;
use lotus_core::estimators::{SearchSpace, TaskKind};
use lotus_core::eval::{leave_one_out, Baselines, LooConfig, LOTUS};
use lotus_core::metrics::MetricName;
use lotus_core::runtime::Env;
use lotus_core::search::{meta_train, random_search, Budget, MetaDataset, MetaTrainConfig};
use lotus_core::similarity::{rank_candidates, recommend, SimilarityConfig};
use lotus_core::store::MemoryStore;
use lotus_core::{synth, Error};

fn datasets(n: usize) -> Vec<MetaDataset> {
    (0..n)
        .map(|i| {
            let (x, labels) = match i % 2 {
                0 => synth::blobs(60, 3, 3, 1.0, i as u64),
                _ => synth::stripes(60, 3, 2, i as u64),
            };
            let id = format!("d{i}");
            MetaDataset {
                data: standardize_matrix(&x, &id).unwrap(),
                id,
                labels,
                task: TaskKind::Clustering,
            }
        })
        .collect()
}

fn trained(ds: &[MetaDataset], seed: u64) -> MemoryStore {
    let space = SearchSpace::standard();
    let sim = SimilarityConfig::default();
    let cfg = MetaTrainConfig {
        space: &space,
        metric: MetricName::Ami,
        budget: Budget::Trials(6),
        seed,
        similarity: &sim,
    };
    let mut store = MemoryStore::new();
    let summary = meta_train(ds, &cfg, &mut store, Env::sequential()).unwrap();
    assert_eq!(summary.written.len(), ds.len());
    store
}

#[test]
fn search_best_is_trial_maximum() {
    let ds = &datasets(1)[0];
    let out = random_search(
        &ds.data,
        &ds.labels,
        TaskKind::Clustering,
        &SearchSpace::standard(),
        MetricName::Ami,
        Budget::Trials(12),
        3,
        Env::sequential(),
    )
    .unwrap();
    assert!(out.trials.len() <= 12);
    let max = out.trials.iter().map(|t| t.score).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_score.value, max);
}

#[test]
fn meta_train_is_deterministic() {
    let ds = datasets(3);
    let a = trained(&ds, 5);
    let b = trained(&ds, 5);
    assert_eq!(a.iter().collect::<Vec<_>>(), b.iter().collect::<Vec<_>>());
}

#[test]
fn ranking_ignores_insertion_order() {
    let ds = datasets(4);
    let store = trained(&ds, 1);
    let mut entries: Vec<_> = store.iter().cloned().collect();
    entries.reverse();
    let reversed: MemoryStore = entries.into_iter().collect();
    let sim = SimilarityConfig::default();
    let q = &ds[0].data;
    let a = rank_candidates(q, &store, TaskKind::Clustering, &sim, 9, Env::sequential()).unwrap();
    let b = rank_candidates(q, &reversed, TaskKind::Clustering, &sim, 9, Env::sequential()).unwrap();
    let strip = |v: Vec<lotus_core::similarity::DistanceRecord>| {
        v.into_iter().map(|r| (r.candidate_id, r.value.to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn recommend_returns_duplicate_and_repeats() {
    let ds = datasets(4);
    let store = trained(&ds, 0);
    let sim = SimilarityConfig::default();
    let r1 = recommend(&ds[2].data, &store, TaskKind::Clustering, &sim, 0, Env::sequential()).unwrap();
    let r2 = recommend(&ds[2].data, &store, TaskKind::Clustering, &sim, 0, Env::sequential()).unwrap();
    assert_eq!(r1.source_dataset, "d2");
    assert_eq!(r1, r2);
    assert_eq!(r1.pipeline, store.get(TaskKind::Clustering, "d2").unwrap().pipeline);
}

#[test]
fn recommend_on_empty_store_fails() {
    let ds = datasets(1);
    let err = recommend(
        &ds[0].data,
        &MemoryStore::new(),
        TaskKind::Clustering,
        &SimilarityConfig::default(),
        0,
        Env::sequential(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::EmptyStore(_)), "{err}");
}

#[test]
fn loo_keeps_held_out_dataset_out_of_its_store() {
    let ds = datasets(4);
    let cfg = LooConfig {
        space: SearchSpace::standard(),
        metric: MetricName::Ami,
        budget: Budget::Trials(4),
        seed: 2,
        similarity: SimilarityConfig::default(),
        baselines: Baselines {
            defaults: true,
            internal_cvi: true,
            random_specs: 3,
        },
        rope: 0.01,
        rope_samples: 2000,
    };
    let report = leave_one_out(&ds, &cfg, Env::sequential()).unwrap();
    assert_eq!(report.folds.len(), 4);
    for f in &report.folds {
        assert!(!f.store_ids.contains(&f.dataset_id), "{f:?}");
        assert_eq!(f.store_ids.len(), 3);
        assert_ne!(f.source_dataset.as_deref(), Some(f.dataset_id.as_str()));
    }
    assert!(report.mean_score(LOTUS).is_some());
    let again = leave_one_out(&ds, &cfg, Env::sequential()).unwrap();
    assert_eq!(report.rows, again.rows);
    assert_eq!(report.rope, again.rope);
}
