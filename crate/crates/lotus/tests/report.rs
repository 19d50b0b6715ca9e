use std::fs;

use lotus::config::RunConfig;
use lotus::report::{emit_report, write_timings, ReportHeader};
use lotus_core::dataset::standardize_matrix;
use lotus_core::estimators::{SearchSpace, TaskKind};
use lotus_core::eval::{leave_one_out, Baselines, EvalReport, LooConfig};
use lotus_core::metrics::MetricName;
use lotus_core::runtime::Env;
use lotus_core::search::{Budget, MetaDataset};
use lotus_core::similarity::SimilarityConfig;
use lotus_core::synth;

fn report(baselines: Baselines) -> EvalReport {
    let datasets: Vec<MetaDataset> = (0..3)
        .map(|i| {
            let (x, labels) = synth::blobs(40, 2, 2, 1.0, i);
            let id = format!("b{i}");
            MetaDataset {
                data: standardize_matrix(&x, &id).unwrap(),
                id,
                labels,
                task: TaskKind::Clustering,
            }
        })
        .collect();
    let cfg = LooConfig {
        space: SearchSpace::standard(),
        metric: MetricName::Ami,
        budget: Budget::Trials(3),
        seed: 1,
        similarity: SimilarityConfig::default(),
        baselines,
        rope: 0.01,
        rope_samples: 1000,
    };
    leave_one_out(&datasets, &cfg, Env::sequential()).unwrap()
}

fn header() -> ReportHeader {
    ReportHeader::new(RunConfig::default(), "clustering", "ami")
}

#[test]
fn emitted_files_are_byte_stable() {
    let r = report(Baselines {
        defaults: false,
        internal_cvi: true,
        random_specs: 2,
    });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = emit_report(&r, &header(), a.path()).unwrap();
    let mut r2 = r.clone();
    r2.timings.iter_mut().for_each(|t| t.seconds += 1.0);
    let fb = emit_report(&r2, &header(), b.path()).unwrap();
    assert_eq!(fa.len(), 5);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }

    // three methods: lotus, internal_cvi, random
    let ranks = fs::read_to_string(a.path().join("ranks.csv")).unwrap();
    assert_eq!(ranks.lines().next().unwrap(), "dataset_id,lotus,internal_cvi,random");
    assert_eq!(ranks.lines().count(), 4);

    let t = a.path().join("timings.csv");
    write_timings(&r, &t).unwrap();
    assert!(fs::read_to_string(t).unwrap().starts_with("dataset_id,stage,seconds\n"));
}

#[test]
fn no_baselines_gives_header_only_tables() {
    let r = report(Baselines {
        defaults: false,
        internal_cvi: false,
        random_specs: 0,
    });
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, &header(), dir.path()).unwrap();
    for name in ["ranks.csv", "rope.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 1, "{name}: {text}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("\"budget\": 50"), "{summary}");
}
