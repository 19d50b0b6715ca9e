//! Leave-one-out benchmarking and the statistics used to compare methods:
//! a Bayesian signed-rank test with a region of practical equivalence, and
//! Friedman ranks with the Nemenyi critical difference.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_predict, sample_spec, Algorithm, PipelineSpec, SearchSpace, TaskKind};
use crate::math;
use crate::metrics::{score_prediction, MetricName};
use crate::rng::{self, derive_seed_str};
use crate::runtime::{timed, Env, Executor};
use crate::search::{internal_cvi_search, meta_train, trial_seeds, Budget, MetaDataset, MetaTrainConfig};
use crate::similarity::{recommend, SimilarityConfig};

pub const LOTUS: &str = "lotus";
pub const INTERNAL_CVI: &str = "internal_cvi";
pub const RANDOM: &str = "random";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// One method per algorithm of the task, run at its default parameters.
    pub defaults: bool,
    /// Calinski-Harabasz search with the same budget (clustering only).
    pub internal_cvi: bool,
    /// Mean score of this many independently sampled specs; 0 disables.
    pub random_specs: usize,
}

impl Default for Baselines {
    fn default() -> Self {
        Baselines {
            defaults: true,
            internal_cvi: true,
            random_specs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooConfig {
    pub space: SearchSpace,
    pub metric: MetricName,
    pub budget: Budget,
    pub seed: u64,
    pub similarity: SimilarityConfig,
    pub baselines: Baselines,
    pub rope: f64,
    pub rope_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub dataset_id: String,
    pub method: String,
    pub score: f64,
    /// Set when the method failed and `score` is the metric's worst value.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub dataset_id: String,
    /// Ids in the store the recommendation was drawn from.
    pub store_ids: Vec<String>,
    pub source_dataset: Option<String>,
    pub pipeline: Option<PipelineSpec>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// datasets × methods, 1 = best.
    pub ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
    pub friedman: f64,
    pub critical_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopeRow {
    pub method_a: String,
    pub method_b: String,
    pub posterior: RopePosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dataset_id: String,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: MetricName,
    pub methods: Vec<String>,
    pub rows: Vec<ScoreRow>,
    pub folds: Vec<Fold>,
    pub ranks: Option<RankTable>,
    pub rope: Vec<RopeRow>,
    /// Skipped during meta-training: `(dataset id, reason)`.
    pub skipped: Vec<(String, String)>,
    /// Wall-clock records; everything else in the report is deterministic.
    pub timings: Vec<TimingRow>,
}

impl EvalReport {
    pub fn score(&self, dataset: &str, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.dataset_id == dataset && r.method == method)
            .map(|r| r.score)
    }

    /// Mean score of `method` over the datasets it was run on.
    pub fn mean_score(&self, method: &str) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.method == method).map(|r| r.score).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn default_name(a: Algorithm) -> String {
    format!("default_{}", a.as_str())
}

/// Fits `spec` and scores it; failures give the metric's worst value.
fn evaluate_spec(d: &MetaDataset, spec: &PipelineSpec, metric: MetricName, seed: u64) -> (f64, Option<String>) {
    let out = fit_predict(spec, &d.data, seed).and_then(|p| score_prediction(metric, d.data.data(), &p, &d.labels));
    match out {
        Ok(v) if !v.value.is_nan() => (v.value, None),
        Ok(_) => (metric.worst(), Some("score is NaN".into())),
        Err(e) => (metric.worst(), Some(e.to_string())),
    }
}

/// Holds out each dataset in turn, recommends from the entries of all the
/// others, and scores the recommendation against the held-out labels along
/// with the requested baselines.
///
/// A dataset's store entry depends only on its own data and the seed, so
/// the full store is built once and each fold drops its own entry.
pub fn leave_one_out<E: Executor>(datasets: &[MetaDataset], cfg: &LooConfig, env: Env<'_, E>) -> Result<EvalReport> {
    if datasets.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "leave-one-out needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let task = cfg.metric.task();
    let mut store = crate::store::MemoryStore::new();
    let mt = MetaTrainConfig {
        space: &cfg.space,
        metric: cfg.metric,
        budget: cfg.budget,
        seed: cfg.seed,
        similarity: &cfg.similarity,
    };
    let (summary, train_time) = timed(env.clock, || meta_train(datasets, &mt, &mut store, env));
    let summary = summary?;

    let mut methods = vec![String::from(LOTUS)];
    let defaults: Vec<Algorithm> = if cfg.baselines.defaults {
        cfg.space.algorithms_for(task)
    } else {
        Vec::new()
    };
    methods.extend(defaults.iter().map(|&a| default_name(a)));
    let cvi = cfg.baselines.internal_cvi && task == TaskKind::Clustering;
    if cvi {
        methods.push(INTERNAL_CVI.into());
    }
    if cfg.baselines.random_specs > 0 {
        methods.push(RANDOM.into());
    }

    let folds = env.exec.map(datasets.iter().collect(), |d| {
        let fit_seed = derive_seed_str(cfg.seed, &d.id);
        let mut rows = Vec::new();
        let mut timings = Vec::new();
        let mut fold_store = store.clone();
        fold_store.remove(task, &d.id);
        let store_ids: Vec<String> = fold_store.for_task(task).iter().map(|e| e.dataset_id.clone()).collect();

        let (rec, secs) = timed(env.clock, || {
            recommend(&d.data, &fold_store, task, &cfg.similarity, cfg.seed, env)
        });
        timings.push(TimingRow {
            dataset_id: d.id.clone(),
            stage: "recommend".into(),
            seconds: secs,
        });
        let fold = match rec {
            Ok(r) => {
                let (score, error) = evaluate_spec(d, &r.pipeline, cfg.metric, fit_seed);
                rows.push((LOTUS.to_string(), score, error));
                Fold {
                    dataset_id: d.id.clone(),
                    store_ids,
                    source_dataset: Some(r.source_dataset),
                    pipeline: Some(r.pipeline),
                    distance: Some(r.distance),
                }
            }
            Err(e) => {
                rows.push((LOTUS.to_string(), cfg.metric.worst(), Some(e.to_string())));
                Fold {
                    dataset_id: d.id.clone(),
                    store_ids,
                    source_dataset: None,
                    pipeline: None,
                    distance: None,
                }
            }
        };

        for &a in &defaults {
            let (score, error) = evaluate_spec(d, &PipelineSpec::default_for(a), cfg.metric, fit_seed);
            rows.push((default_name(a), score, error));
        }
        if cvi {
            let seed = derive_seed_str(cfg.seed, &format!("cvi:{}", d.id));
            let (found, secs) = timed(env.clock, || internal_cvi_search(&d.data, &cfg.space, cfg.budget, seed, env));
            timings.push(TimingRow {
                dataset_id: d.id.clone(),
                stage: INTERNAL_CVI.into(),
                seconds: secs,
            });
            let (score, error) = match found {
                Ok(f) => {
                    let best = f
                        .trials
                        .iter()
                        .find(|t| t.error.is_none() && t.spec == f.best && t.score == f.best_score.value)
                        .expect("the best spec is one of the trials");
                    evaluate_spec(d, &f.best, cfg.metric, trial_seeds(seed, best.index).1)
                }
                Err(e) => (cfg.metric.worst(), Some(e.to_string())),
            };
            rows.push((INTERNAL_CVI.to_string(), score, error));
        }
        if cfg.baselines.random_specs > 0 {
            let seed = derive_seed_str(cfg.seed, &format!("random:{}", d.id));
            let total: f64 = (0..cfg.baselines.random_specs)
                .map(|i| {
                    let (spec_seed, fit) = trial_seeds(seed, i);
                    match sample_spec(&cfg.space, task, spec_seed) {
                        Ok(spec) => evaluate_spec(d, &spec, cfg.metric, fit).0,
                        Err(_) => cfg.metric.worst(),
                    }
                })
                .sum();
            rows.push((RANDOM.to_string(), total / cfg.baselines.random_specs as f64, None));
        }
        let rows: Vec<ScoreRow> = rows
            .into_iter()
            .map(|(method, score, error)| ScoreRow {
                dataset_id: d.id.clone(),
                method,
                score,
                error,
            })
            .collect();
        (rows, fold, timings)
    });

    let mut report = EvalReport {
        metric: cfg.metric,
        methods,
        rows: Vec::new(),
        folds: Vec::new(),
        ranks: None,
        rope: Vec::new(),
        skipped: summary.skipped,
        timings: vec![TimingRow {
            dataset_id: "*".into(),
            stage: "meta_train".into(),
            seconds: train_time,
        }],
    };
    for (rows, fold, timings) in folds {
        report.rows.extend(rows);
        report.folds.push(fold);
        report.timings.extend(timings);
    }

    let ids: Vec<String> = datasets.iter().map(|d| d.id.clone()).collect();
    let table: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| {
            report
                .methods
                .iter()
                .map(|m| report.score(id, m).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    if report.methods.len() >= 2 {
        let f = friedman_cd(&table, cfg.metric.maximize())?;
        report.ranks = Some(RankTable {
            methods: report.methods.clone(),
            datasets: ids,
            ranks: f.ranks,
            avg_ranks: f.avg_ranks,
            friedman: f.statistic,
            critical_difference: f.critical_difference,
        });
        for (j, other) in report.methods.iter().enumerate().skip(1) {
            let a: Vec<f64> = table.iter().map(|r| r[0]).collect();
            let b: Vec<f64> = table.iter().map(|r| r[j]).collect();
            let posterior = rope_test(&a, &b, cfg.rope, cfg.rope_samples, derive_seed_str(cfg.seed, other))?;
            report.rope.push(RopeRow {
                method_a: LOTUS.into(),
                method_b: other.clone(),
                posterior,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopePosterior {
    /// `a` practically better.
    pub p_a: f64,
    pub p_rope: f64,
    pub p_b: f64,
}

/// Bayesian signed-rank test on the paired differences `a - b`.
///
/// Each Monte-Carlo sample draws flat Dirichlet weights over the
/// differences plus one pseudo-observation at zero, then compares the
/// weighted mass of Walsh averages `(z_i + z_j) / 2` below `-rope`, inside
/// `[-rope, rope]` and above `rope`. The reported probabilities are the
/// fractions of samples in which each region holds the most mass.
pub fn rope_test(a: &[f64], b: &[f64], rope: f64, samples: usize, seed: u64) -> Result<RopePosterior> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} and {} paired scores", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("the signed-rank test needs at least 2 pairs".into()));
    }
    if !(rope >= 0.0) || samples == 0 {
        return Err(Error::InvalidParameter(format!(
            "rope must be non-negative and samples positive, got {rope} and {samples}"
        )));
    }
    let mut z = vec![0.0];
    z.extend(a.iter().zip(b).map(|(x, y)| x - y));
    let n = z.len();
    // region of every Walsh pair: -1 left, 0 rope, 1 right
    let region: Vec<i8> = (0..n * n)
        .map(|k| {
            let s = z[k / n] + z[k % n];
            if s > 2.0 * rope {
                1
            } else if s < -2.0 * rope {
                -1
            } else {
                0
            }
        })
        .collect();
    let mut rng = rng::rng(seed);
    let mut wins = [0usize; 3];
    let mut w = vec![0.0; n];
    for _ in 0..samples {
        let mut total = 0.0;
        for x in w.iter_mut() {
            *x = Exp1.sample(&mut rng);
            total += *x;
        }
        let mut mass = [0.0; 3];
        for i in 0..n {
            let wi = w[i] / total;
            let row = &region[i * n..(i + 1) * n];
            for (j, &r) in row.iter().enumerate() {
                mass[(r + 1) as usize] += wi * w[j] / total;
            }
        }
        let winner = if mass[2] > mass[0] && mass[2] > mass[1] {
            2
        } else if mass[0] > mass[1] && mass[0] > mass[2] {
            0
        } else {
            1
        };
        wins[winner] += 1;
    }
    let s = samples as f64;
    Ok(RopePosterior {
        p_a: wins[2] as f64 / s,
        p_rope: wins[1] as f64 / s,
        p_b: wins[0] as f64 / s,
    })
}

/// Studentized range over sqrt(2), alpha = 0.05, for k = 2..=10 methods.
const NEMENYI_Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
    /// Friedman chi-square with `k - 1` degrees of freedom.
    pub statistic: f64,
    /// Nemenyi critical difference at alpha = 0.05; `None` beyond 10
    /// methods.
    pub critical_difference: Option<f64>,
}

pub fn nemenyi_cd(k: usize, n: usize) -> Option<f64> {
    let q = *NEMENYI_Q_05.get(k.checked_sub(2)?)?;
    Some(q * math::sqrt((k * (k + 1)) as f64 / (6.0 * n as f64)))
}

/// Ranks of `row`, 1 for the best, ties sharing their mean rank.
pub fn rank_row(row: &[f64], maximize: bool) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        let c = row[i].total_cmp(&row[j]);
        if maximize {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start;
        while end + 1 < k && row[order[end + 1]] == row[order[start]] {
            end += 1;
        }
        let mid = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = mid;
        }
        start = end + 1;
    }
    ranks
}

/// Friedman test over a datasets × methods score table.
pub fn friedman_cd(table: &[Vec<f64>], maximize: bool) -> Result<FriedmanResult> {
    let n = table.len();
    let k = table.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 datasets and 2 methods, got {n} and {k}"
        )));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch(format!("row {i} has {} cells, expected {k}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidParameter(format!("missing score at dataset {i}, method {j}")));
        }
    }
    let ranks: Vec<Vec<f64>> = table.iter().map(|r| rank_row(r, maximize)).collect();
    let avg_ranks: Vec<f64> = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    Ok(FriedmanResult {
        ranks,
        avg_ranks,
        statistic,
        critical_difference: nemenyi_cd(k, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rope_identical_is_equivalent() {
        let a: Vec<f64> = (0..15).map(|i| i as f64 / 15.0).collect();
        let p = rope_test(&a, &a, 0.01, 20_000, 1).unwrap();
        assert_eq!(p.p_rope, 1.0);
    }

    #[test]
    fn rope_shift_favors_the_larger() {
        let b: Vec<f64> = (0..20).map(|i| (i % 7) as f64 / 10.0).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        let p = rope_test(&a, &b, 0.01, 20_000, 2).unwrap();
        assert!(p.p_a > 0.99);
        let q = rope_test(&b, &a, 0.01, 20_000, 2).unwrap();
        assert!(q.p_b > 0.99);
        assert!((p.p_a + p.p_rope + p.p_b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rope_rejects_bad_input() {
        assert!(rope_test(&[1.0, 2.0], &[1.0], 0.01, 10, 0).is_err());
        assert!(rope_test(&[1.0], &[1.0], 0.01, 10, 0).is_err());
        assert!(rope_test(&[1.0, 2.0], &[1.0, 2.0], -0.1, 10, 0).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(rank_row(&[0.5, 0.9, 0.5, 0.1], true), vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(rank_row(&[0.5, 0.9, 0.5, 0.1], false), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn cd_k3_n10() {
        let cd = nemenyi_cd(3, 10).unwrap();
        assert!((cd - 2.343 * math::sqrt(0.2)).abs() < 1e-12);
        assert!((cd - 1.048).abs() < 1e-3);
        assert_eq!(nemenyi_cd(11, 10), None);
    }

    #[test]
    fn friedman_dominant_and_tied() {
        let t: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0 + i as f64, 0.5, 0.2 * i as f64]).collect();
        let f = friedman_cd(&t, true).unwrap();
        assert_eq!(f.avg_ranks[0], 1.0);
        let flat = vec![vec![0.3; 4]; 6];
        let g = friedman_cd(&flat, true).unwrap();
        assert!(g.avg_ranks.iter().all(|&r| r == 2.5));
        assert_eq!(g.statistic, 0.0);
    }

    #[test]
    fn friedman_rejects_missing_cells() {
        assert!(friedman_cd(&[vec![1.0, f64::NAN], vec![1.0, 2.0]], true).is_err());
        assert!(friedman_cd(&[vec![1.0, 2.0]], true).is_err());
    }
}
