//! Random-search CASH over the estimator registry, scored either against
//! ground truth or by an internal validity index, and the meta-training
//! loop that fills a store.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::NumericMatrix;
use crate::error::{Error, Result};
use crate::estimators::{fit_predict, sample_spec, PipelineSpec, SearchSpace, TaskKind};
use crate::metrics::{score_prediction, MetricName, MetricValue};
use crate::rng::{derive_seed, derive_seed_str};
use crate::runtime::{timed, Clock, Env, Executor};
use crate::similarity::{embed, SimilarityConfig};
use crate::store::{MemoryStore, StoreEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Trials(usize),
    /// Trials run one after another until `seconds` have passed on the
    /// clock, never more than `max_trials`.
    Seconds { seconds: f64, max_trials: usize },
}

impl Budget {
    fn max_trials(self) -> usize {
        match self {
            Budget::Trials(n) => n,
            Budget::Seconds { max_trials, .. } => max_trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub spec: PipelineSpec,
    /// The metric's worst value when the trial failed.
    pub score: f64,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: PipelineSpec,
    pub best_score: MetricValue,
    pub trials: Vec<Trial>,
    pub budget_used: usize,
}

/// Spec and fit seeds for trial `index`.
pub fn trial_seeds(seed: u64, index: usize) -> (u64, u64) {
    let s = derive_seed(seed, index as u64);
    (derive_seed(s, 0), derive_seed(s, 1))
}

struct Problem<'a> {
    data: &'a NumericMatrix,
    truth: &'a [i64],
    task: TaskKind,
    space: &'a SearchSpace,
    metric: MetricName,
}

impl Problem<'_> {
    fn run(&self, index: usize, seed: u64, clock: &dyn Clock) -> Result<Trial> {
        let (spec_seed, fit_seed) = trial_seeds(seed, index);
        let spec = sample_spec(self.space, self.task, spec_seed)?;
        let (out, wall_time) = timed(clock, || {
            let pred = fit_predict(&spec, self.data, fit_seed)?;
            let v = score_prediction(self.metric, self.data.data(), &pred, self.truth)?;
            if v.value.is_nan() {
                return Err(Error::UndefinedMetric(format!("{} is NaN", self.metric)));
            }
            Ok(v.value)
        });
        let (score, error) = match out {
            Ok(v) => (v, None),
            Err(e) => (self.metric.worst(), Some(e.to_string())),
        };
        Ok(Trial {
            index,
            spec,
            score,
            wall_time,
            error,
        })
    }
}

fn search<E: Executor>(p: &Problem<'_>, budget: Budget, seed: u64, env: Env<'_, E>) -> Result<SearchResult> {
    if p.metric.task() != p.task {
        return Err(Error::InvalidParameter(format!(
            "metric {} does not score {} pipelines",
            p.metric, p.task
        )));
    }
    let n_max = budget.max_trials();
    if n_max == 0 {
        return Err(Error::InvalidParameter("the budget must allow at least one trial".into()));
    }
    let trials: Vec<Trial> = match budget {
        Budget::Trials(n) => env
            .exec
            .map((0..n).collect(), |i| p.run(i, seed, env.clock))
            .into_iter()
            .collect::<Result<_>>()?,
        Budget::Seconds { seconds, max_trials } => {
            let start = env.clock.now();
            let mut out = Vec::new();
            while out.len() < max_trials && (out.is_empty() || env.clock.now() - start < seconds) {
                out.push(p.run(out.len(), seed, env.clock)?);
            }
            out
        }
    };
    let mut best: Option<&Trial> = None;
    for t in trials.iter().filter(|t| t.error.is_none()) {
        if best.is_none_or(|b| p.metric.better(t.score, b.score)) {
            best = Some(t);
        }
    }
    match best.map(|b| (b.spec.clone(), b.score)) {
        Some((spec, score)) => Ok(SearchResult {
            best: spec,
            best_score: MetricValue::new(p.metric, score),
            budget_used: trials.len(),
            trials,
        }),
        None => Err(Error::SearchFailed {
            trials: trials.len(),
            last_error: trials
                .last()
                .and_then(|t| t.error.clone())
                .unwrap_or_default(),
        }),
    }
}

/// Random search scored against ground-truth `labels` (0/1 for outlier
/// tasks). Every trial fits on all rows.
#[allow(clippy::too_many_arguments)]
pub fn random_search<E: Executor>(
    data: &NumericMatrix,
    labels: &[i64],
    task: TaskKind,
    space: &SearchSpace,
    metric: MetricName,
    budget: Budget,
    seed: u64,
    env: Env<'_, E>,
) -> Result<SearchResult> {
    if labels.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            data.n()
        )));
    }
    let p = Problem {
        data,
        truth: labels,
        task,
        space,
        metric,
    };
    search(&p, budget, seed, env)
}

/// Label-free clustering search maximizing Calinski-Harabasz. Trials whose
/// index is undefined (one cluster, all noise) count as failed.
pub fn internal_cvi_search<E: Executor>(
    data: &NumericMatrix,
    space: &SearchSpace,
    budget: Budget,
    seed: u64,
    env: Env<'_, E>,
) -> Result<SearchResult> {
    let p = Problem {
        data,
        truth: &[],
        task: TaskKind::Clustering,
        space,
        metric: MetricName::CalinskiHarabasz,
    };
    search(&p, budget, seed, env)
}

/// A labeled dataset for meta-training.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub id: String,
    pub data: NumericMatrix,
    pub labels: Vec<i64>,
    pub task: TaskKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetaTrainSummary {
    pub written: Vec<String>,
    /// `(dataset id, reason)`
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaTrainConfig<'a> {
    pub space: &'a SearchSpace,
    pub metric: MetricName,
    pub budget: Budget,
    pub seed: u64,
    pub similarity: &'a SimilarityConfig,
}

/// Searches every dataset and upserts one entry per success. Failures are
/// reported in the summary and leave the store untouched for that id.
pub fn meta_train<E: Executor>(
    datasets: &[MetaDataset],
    cfg: &MetaTrainConfig<'_>,
    store: &mut MemoryStore,
    env: Env<'_, E>,
) -> Result<MetaTrainSummary> {
    let task = cfg.metric.task();
    if let Some(d) = datasets.iter().find(|d| d.task != task) {
        return Err(Error::InvalidParameter(format!(
            "dataset {} is a {} task but metric {} scores {}",
            d.id, d.task, cfg.metric, task
        )));
    }
    let outcomes = env.exec.map(datasets.iter().collect(), |d| -> Result<StoreEntry> {
        let found = random_search(
            &d.data,
            &d.labels,
            task,
            cfg.space,
            cfg.metric,
            cfg.budget,
            derive_seed_str(cfg.seed, &d.id),
            env,
        )?;
        let embedding = embed(&d.data, cfg.similarity, cfg.seed)?;
        Ok(StoreEntry {
            dataset_id: d.id.clone(),
            task,
            embedding,
            pipeline: found.best,
            score: found.best_score,
        })
    });
    let mut summary = MetaTrainSummary::default();
    for (d, out) in datasets.iter().zip(outcomes) {
        match out {
            Ok(entry) => {
                summary.written.push(d.id.clone());
                store.upsert(entry);
            }
            Err(e) => summary.skipped.push((d.id.clone(), e.to_string())),
        }
    }
    Ok(summary)
}
