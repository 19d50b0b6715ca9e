//! Built-in clusterers and outlier detectors, their hyperparameter domains,
//! and uniform sampling of pipeline specs from those domains.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::NumericMatrix;
use crate::error::{Error, Result};
use crate::rng;

mod agglomerative;
mod dbscan;
mod distance;
mod hbos;
mod iforest;
mod kmeans;
mod neighbors;

pub use distance::Affinity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Clustering,
    Outlier,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Clustering => "clustering",
            TaskKind::Outlier => "outlier",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clustering" => Some(TaskKind::Clustering),
            "outlier" => Some(TaskKind::Outlier),
            _ => None,
        }
    }
}

impl core::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans,
    Agglomerative,
    Dbscan,
    Knn,
    Lof,
    Hbos,
    Iforest,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Kmeans,
        Algorithm::Agglomerative,
        Algorithm::Dbscan,
        Algorithm::Knn,
        Algorithm::Lof,
        Algorithm::Hbos,
        Algorithm::Iforest,
    ];

    pub fn task(self) -> TaskKind {
        match self {
            Algorithm::Kmeans | Algorithm::Agglomerative | Algorithm::Dbscan => TaskKind::Clustering,
            _ => TaskKind::Outlier,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Agglomerative => "agglomerative",
            Algorithm::Dbscan => "dbscan",
            Algorithm::Knn => "knn",
            Algorithm::Lof => "lof",
            Algorithm::Hbos => "hbos",
            Algorithm::Iforest => "iforest",
        }
    }
}

/// A hyperparameter value. Integers and reals stay distinct through JSON
/// because reals always serialize with a fractional part or exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

impl core::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Choice(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Inclusive integer range.
    Int { lo: i64, hi: i64 },
    /// Closed real interval.
    Real { lo: f64, hi: f64 },
    IntSet { values: Vec<i64> },
    Choice { values: Vec<String> },
}

impl Domain {
    fn check(&self) -> Result<()> {
        let ok = match self {
            Domain::Int { lo, hi } => lo <= hi,
            Domain::Real { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Domain::IntSet { values } => !values.is_empty(),
            Domain::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("empty or unordered domain {self:?}")))
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (Domain::Int { lo, hi }, ParamValue::Int(x)) => lo <= x && x <= hi,
            (Domain::Real { lo, hi }, ParamValue::Real(x)) => *lo <= *x && *x <= *hi,
            (Domain::IntSet { values }, ParamValue::Int(x)) => values.contains(x),
            (Domain::Choice { values }, ParamValue::Choice(x)) => values.contains(x),
            _ => false,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> ParamValue {
        match self {
            Domain::Int { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            Domain::Real { lo, hi } => ParamValue::Real(if lo == hi { *lo } else { rng.random_range(*lo..=*hi) }),
            Domain::IntSet { values } => ParamValue::Int(values[rng.random_range(0..values.len())]),
            Domain::Choice { values } => ParamValue::Choice(values[rng.random_range(0..values.len())].clone()),
        }
    }
}

fn int(lo: i64, hi: i64) -> Domain {
    Domain::Int { lo, hi }
}

fn real(lo: f64, hi: f64) -> Domain {
    Domain::Real { lo, hi }
}

fn choice(values: &[&str]) -> Domain {
    Domain::Choice {
        values: values.iter().map(|s| s.to_string()).collect(),
    }
}

/// Per-algorithm hyperparameter domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub algorithms: BTreeMap<Algorithm, BTreeMap<String, Domain>>,
}

impl SearchSpace {
    /// Every built-in algorithm with its standard domain.
    pub fn standard() -> Self {
        let mut algorithms = BTreeMap::new();
        let params = |list: &[(&str, Domain)]| -> BTreeMap<String, Domain> {
            list.iter().map(|(k, d)| (k.to_string(), d.clone())).collect()
        };
        algorithms.insert(
            Algorithm::Kmeans,
            params(&[
                ("n_clusters", int(2, 21)),
                ("n_init", choice(&["auto"])),
                ("max_iter", int(300, 500)),
                ("algorithm", choice(&["lloyd", "elkan"])),
            ]),
        );
        algorithms.insert(
            Algorithm::Agglomerative,
            params(&[
                ("n_clusters", int(2, 21)),
                ("affinity", choice(&["euclidean", "manhattan", "cosine", "l1", "l2"])),
                ("linkage", choice(&["ward", "complete", "average", "single"])),
            ]),
        );
        algorithms.insert(
            Algorithm::Dbscan,
            params(&[
                ("eps", real(0.1, 0.5)),
                ("min_samples", Domain::IntSet { values: (3..=8).collect() }),
                ("p", Domain::IntSet { values: alloc::vec![1, 2] }),
            ]),
        );
        algorithms.insert(
            Algorithm::Knn,
            params(&[
                ("n_neighbors", int(1, 100)),
                ("method", choice(&["largest", "mean", "median"])),
            ]),
        );
        algorithms.insert(
            Algorithm::Lof,
            params(&[
                ("n_neighbors", int(1, 100)),
                ("metric", choice(&["manhattan", "euclidean", "minkowski"])),
            ]),
        );
        algorithms.insert(
            Algorithm::Hbos,
            params(&[("n_bins", int(5, 100)), ("alpha", real(0.1, 0.5))]),
        );
        algorithms.insert(
            Algorithm::Iforest,
            params(&[("n_estimators", int(10, 200)), ("max_features", real(0.1, 0.9))]),
        );
        SearchSpace { algorithms }
    }

    /// The standard space restricted to one task.
    pub fn for_task(task: TaskKind) -> Self {
        let mut s = Self::standard();
        s.algorithms.retain(|a, _| a.task() == task);
        s
    }

    pub fn algorithms_for(&self, task: TaskKind) -> Vec<Algorithm> {
        self.algorithms.keys().copied().filter(|a| a.task() == task).collect()
    }

    pub fn check(&self) -> Result<()> {
        for params in self.algorithms.values() {
            for d in params.values() {
                d.check()?;
            }
        }
        Ok(())
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub algorithm: Algorithm,
    pub params: BTreeMap<String, ParamValue>,
    pub task: TaskKind,
}

impl PipelineSpec {
    pub fn new(algorithm: Algorithm, params: &[(&str, ParamValue)]) -> Self {
        PipelineSpec {
            algorithm,
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            task: algorithm.task(),
        }
    }

    /// Checks this pipeline against `space`: task agreement, no missing or extra
    /// params, every value inside its domain, and ward paired with euclidean.
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        if self.algorithm.task() != self.task {
            return Err(Error::InvalidParameter(format!(
                "{} is not a {} algorithm",
                self.algorithm.as_str(),
                self.task
            )));
        }
        let domains = space.algorithms.get(&self.algorithm).ok_or_else(|| {
            Error::InvalidParameter(format!("{} is not in the search space", self.algorithm.as_str()))
        })?;
        for (name, domain) in domains {
            let v = self
                .params
                .get(name)
                .ok_or_else(|| Error::InvalidParameter(format!("missing param {name}")))?;
            if !domain.contains(v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is outside {domain:?}")));
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !domains.contains_key(*k)) {
            return Err(Error::InvalidParameter(format!("unknown param {extra}")));
        }
        if self.algorithm == Algorithm::Agglomerative
            && self.choice("linkage")? == "ward"
            && Affinity::parse(self.choice("affinity")?)? != Affinity::Euclidean
        {
            return Err(Error::InvalidParameter("ward linkage needs euclidean affinity".into()));
        }
        Ok(())
    }

    /// Library defaults, used as fixed baselines.
    pub fn default_for(algorithm: Algorithm) -> Self {
        use ParamValue::{Choice, Int, Real};
        let c = |s: &str| Choice(s.to_string());
        match algorithm {
            Algorithm::Kmeans => Self::new(
                algorithm,
                &[
                    ("n_clusters", Int(8)),
                    ("n_init", c("auto")),
                    ("max_iter", Int(300)),
                    ("algorithm", c("lloyd")),
                ],
            ),
            Algorithm::Agglomerative => Self::new(
                algorithm,
                &[("n_clusters", Int(2)), ("affinity", c("euclidean")), ("linkage", c("ward"))],
            ),
            Algorithm::Dbscan => Self::new(algorithm, &[("eps", Real(0.5)), ("min_samples", Int(5)), ("p", Int(2))]),
            Algorithm::Knn => Self::new(algorithm, &[("n_neighbors", Int(5)), ("method", c("largest"))]),
            Algorithm::Lof => Self::new(algorithm, &[("n_neighbors", Int(20)), ("metric", c("minkowski"))]),
            Algorithm::Hbos => Self::new(algorithm, &[("n_bins", Int(10)), ("alpha", Real(0.1))]),
            Algorithm::Iforest => Self::new(algorithm, &[("n_estimators", Int(100)), ("max_features", Real(0.9))]),
        }
    }

    fn get(&self, name: &str) -> Result<&ParamValue> {
        self.params
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs param {name}", self.algorithm.as_str())))
    }

    fn int(&self, name: &str) -> Result<i64> {
        match self.get(name)? {
            ParamValue::Int(v) => Ok(*v),
            other => Err(Error::InvalidParameter(format!("{name} must be an integer, got {other}"))),
        }
    }

    fn real(&self, name: &str) -> Result<f64> {
        match self.get(name)? {
            ParamValue::Real(v) => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            other => Err(Error::InvalidParameter(format!("{name} must be a number, got {other}"))),
        }
    }

    fn choice(&self, name: &str) -> Result<&str> {
        match self.get(name)? {
            ParamValue::Choice(v) => Ok(v),
            other => Err(Error::InvalidParameter(format!("{name} must be a choice, got {other}"))),
        }
    }

    fn count(&self, name: &str) -> Result<usize> {
        let v = self.int(name)?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl core::fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}(", self.algorithm.as_str())?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Uniform algorithm choice, then one independent uniform draw per param.
///
/// Ward linkage only accepts euclidean affinity, so a draw that pairs them
/// otherwise has its affinity reset to euclidean.
pub fn sample_spec(space: &SearchSpace, task: TaskKind, seed: u64) -> Result<PipelineSpec> {
    let algorithms = space.algorithms_for(task);
    if algorithms.is_empty() {
        return Err(Error::InvalidParameter(format!("search space has no {task} algorithm")));
    }
    let mut rng = rng::rng(seed);
    let algorithm = algorithms[rng.random_range(0..algorithms.len())];
    let params = space.algorithms[&algorithm]
        .iter()
        .map(|(name, d)| (name.clone(), d.sample(&mut rng)))
        .collect();
    let mut spec = PipelineSpec { algorithm, params, task };
    if algorithm == Algorithm::Agglomerative && spec.choice("linkage").ok() == Some("ward") {
        spec.params.insert("affinity".into(), ParamValue::Choice("euclidean".into()));
    }
    Ok(spec)
}

/// Cluster assignment per row; `-1` marks noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<i64>,
}

impl Labeling {
    pub fn new(labels: Vec<i64>) -> Self {
        Labeling { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct non-noise labels.
    pub fn n_clusters(&self) -> usize {
        let mut seen: Vec<i64> = self.labels.iter().copied().filter(|&l| l >= 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Higher is more anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierScores {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Labels(Labeling),
    Scores(OutlierScores),
}

pub fn fit_predict(spec: &PipelineSpec, m: &NumericMatrix, seed: u64) -> Result<Prediction> {
    match spec.task {
        TaskKind::Clustering => fit_predict_clustering(spec, m, seed).map(Prediction::Labels),
        TaskKind::Outlier => fit_predict_outlier(spec, m, seed).map(Prediction::Scores),
    }
}

fn one_of(name: &str, v: &str, allowed: &[&str]) -> Result<()> {
    if allowed.contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} is not one of {allowed:?}")))
    }
}

pub fn fit_predict_clustering(spec: &PipelineSpec, m: &NumericMatrix, seed: u64) -> Result<Labeling> {
    let x = m.data();
    let labels = match spec.algorithm {
        Algorithm::Kmeans => {
            // elkan only accelerates lloyd; both give the same partition
            one_of("algorithm", spec.choice("algorithm")?, &["lloyd", "elkan"])?;
            one_of("n_init", spec.choice("n_init")?, &["auto"])?;
            kmeans::fit(x, spec.count("n_clusters")?, spec.count("max_iter")?, seed)?
        }
        Algorithm::Agglomerative => {
            let linkage = agglomerative::Linkage::parse(spec.choice("linkage")?)?;
            let affinity = Affinity::parse(spec.choice("affinity")?)?;
            agglomerative::fit(x, spec.count("n_clusters")?, linkage, affinity)?
        }
        Algorithm::Dbscan => {
            let p = spec.real("p")?;
            if !(p >= 1.0) {
                return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
            }
            dbscan::fit(x, spec.real("eps")?, spec.count("min_samples")?, p)?
        }
        other => {
            return Err(Error::InvalidParameter(format!("{} is not a clusterer", other.as_str())))
        }
    };
    Ok(Labeling { labels })
}

pub fn fit_predict_outlier(spec: &PipelineSpec, m: &NumericMatrix, seed: u64) -> Result<OutlierScores> {
    let x = m.data();
    let scores = match spec.algorithm {
        Algorithm::Knn => {
            let method = neighbors::KnnMethod::parse(spec.choice("method")?)?;
            neighbors::knn(x, spec.count("n_neighbors")?, method)?
        }
        Algorithm::Lof => {
            let metric = match spec.choice("metric")? {
                "manhattan" => Affinity::Manhattan,
                "euclidean" | "minkowski" => Affinity::Euclidean,
                other => return Err(Error::InvalidParameter(format!("unknown LOF metric {other}"))),
            };
            neighbors::lof(x, spec.count("n_neighbors")?, metric)?
        }
        Algorithm::Hbos => hbos::fit(x, spec.count("n_bins")?, spec.real("alpha")?)?,
        Algorithm::Iforest => iforest::fit(x, spec.count("n_estimators")?, spec.real("max_features")?, seed)?,
        other => {
            return Err(Error::InvalidParameter(format!("{} is not an outlier detector", other.as_str())))
        }
    };
    Ok(OutlierScores { scores })
}
