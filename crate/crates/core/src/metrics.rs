//! External and internal evaluation measures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Prediction, TaskKind};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    RocAuc,
    F1,
    Ami,
    Ari,
    CalinskiHarabasz,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::RocAuc,
        MetricName::F1,
        MetricName::Ami,
        MetricName::Ari,
        MetricName::CalinskiHarabasz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::RocAuc => "roc_auc",
            MetricName::F1 => "f1",
            MetricName::Ami => "ami",
            MetricName::Ari => "ari",
            MetricName::CalinskiHarabasz => "calinski_harabasz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "roc_auc" | "auc" => Ok(MetricName::RocAuc),
            "f1" => Ok(MetricName::F1),
            "ami" => Ok(MetricName::Ami),
            "ari" => Ok(MetricName::Ari),
            "calinski_harabasz" | "ch" => Ok(MetricName::CalinskiHarabasz),
            other => Err(Error::InvalidParameter(format!("unknown metric {other}"))),
        }
    }

    /// Every metric here is better when larger; the flag stays explicit so
    /// callers never assume it.
    pub fn maximize(self) -> bool {
        true
    }

    /// Score imputed for a failed trial.
    pub fn worst(self) -> f64 {
        match self {
            MetricName::RocAuc | MetricName::F1 | MetricName::CalinskiHarabasz => 0.0,
            MetricName::Ami | MetricName::Ari => -1.0,
        }
    }

    pub fn task(self) -> TaskKind {
        match self {
            MetricName::RocAuc | MetricName::F1 => TaskKind::Outlier,
            _ => TaskKind::Clustering,
        }
    }

    /// Whether `a` beats `b` under this metric's direction.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.maximize() {
            a > b
        } else {
            a < b
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: MetricName,
    pub value: f64,
}

impl MetricValue {
    pub fn new(name: MetricName, value: f64) -> Self {
        MetricValue { name, value }
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("lengths {a} and {b}")));
    }
    Ok(())
}

/// Mann-Whitney AUC: the chance a random positive outscores a random
/// negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<MetricValue> {
    same_len(scores.len(), labels.len())?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("ROC-AUC got a NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    // sum of mid-ranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let mid = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[start..=end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(MetricValue::new(MetricName::RocAuc, u / (p * q)))
}

/// F1 of the positive class. No predicted positives gives 0.
pub fn f1_binary(pred: &[bool], labels: &[bool]) -> Result<MetricValue> {
    same_len(pred.len(), labels.len())?;
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::UndefinedMetric("F1 needs both classes in the labels".into()));
    }
    let tp = pred.iter().zip(labels).filter(|(&p, &l)| p && l).count() as f64;
    let predicted = pred.iter().filter(|&&p| p).count() as f64;
    let actual = labels.iter().filter(|&&l| l).count() as f64;
    let value = if predicted == 0.0 { 0.0 } else { 2.0 * tp / (predicted + actual) };
    Ok(MetricValue::new(MetricName::F1, value))
}

/// Marks the `ceil(contamination * n)` highest scores as positive; equal
/// scores are taken in index order.
pub fn top_fraction(scores: &[f64], contamination: f64) -> Vec<bool> {
    let n = scores.len();
    let take = (math::ceil(contamination * n as f64) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut out = vec![false; n];
    for &i in &order[..take] {
        out[i] = true;
    }
    out
}

/// Contingency table of two labelings, with marginals.
struct Contingency {
    n: usize,
    cells: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Contingency {
    fn new(u: &[i64], v: &[i64]) -> Result<Self> {
        same_len(u.len(), v.len())?;
        if u.is_empty() {
            return Err(Error::UndefinedMetric("empty labelings".into()));
        }
        let index = |l: &[i64]| {
            let mut ids = BTreeMap::new();
            for &x in l {
                let next = ids.len();
                ids.entry(x).or_insert(next);
            }
            ids
        };
        let (iu, iv) = (index(u), index(v));
        let mut cells = vec![vec![0usize; iv.len()]; iu.len()];
        for (a, b) in u.iter().zip(v) {
            cells[iu[a]][iv[b]] += 1;
        }
        let rows = cells.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..iv.len()).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        Ok(Contingency { n: u.len(), cells, rows, cols })
    }
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * math::ln(p)
        })
        .sum()
}

fn mutual_info(t: &Contingency) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * math::ln(n * c / (t.rows[i] as f64 * t.cols[j] as f64));
            }
        }
    }
    mi.max(0.0)
}

fn ln_factorial(k: usize) -> f64 {
    math::lgamma(k as f64 + 1.0)
}

/// Expected mutual information when one labeling is randomly permuted
/// against the other (hypergeometric cell counts).
fn expected_mutual_info(t: &Contingency) -> f64 {
    let n = t.n;
    let nf = n as f64;
    let ln_n_fact = ln_factorial(n);
    let mut emi = 0.0;
    for &a in &t.rows {
        for &b in &t.cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for k in lo..=hi {
                let kf = k as f64;
                let log_p = ln_factorial(a) + ln_factorial(b) + ln_factorial(n - a) + ln_factorial(n - b)
                    - ln_n_fact
                    - ln_factorial(k)
                    - ln_factorial(a - k)
                    - ln_factorial(b - k)
                    - ln_factorial(n + k - a - b);
                emi += kf / nf * math::ln(nf * kf / (a as f64 * b as f64)) * math::exp(log_p);
            }
        }
    }
    emi
}

/// Adjusted mutual information with the arithmetic-mean normalizer. Noise
/// labels (`-1`) are an ordinary cluster here.
pub fn ami(u: &[i64], v: &[i64]) -> Result<MetricValue> {
    let t = Contingency::new(u, v)?;
    let value = if t.rows.len() == t.cols.len() && (t.rows.len() == 1 || t.rows.len() == t.n) {
        // both trivial in the same way: the partitions agree
        1.0
    } else {
        let mi = mutual_info(&t);
        let emi = expected_mutual_info(&t);
        let norm = (entropy(&t.rows, t.n) + entropy(&t.cols, t.n)) / 2.0;
        let denom = norm - emi;
        let denom = if denom < 0.0 { denom.min(-f64::EPSILON) } else { denom.max(f64::EPSILON) };
        (mi - emi) / denom
    };
    Ok(MetricValue::new(MetricName::Ami, value))
}

fn pairs(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index.
pub fn ari(u: &[i64], v: &[i64]) -> Result<MetricValue> {
    let t = Contingency::new(u, v)?;
    let value = if t.rows.len() == t.cols.len() && (t.rows.len() == 1 || t.rows.len() == t.n) {
        1.0
    } else {
        let index: f64 = t.cells.iter().flatten().map(|&c| pairs(c)).sum();
        let sa: f64 = t.rows.iter().map(|&c| pairs(c)).sum();
        let sb: f64 = t.cols.iter().map(|&c| pairs(c)).sum();
        let expected = sa * sb / pairs(t.n);
        let max = (sa + sb) / 2.0;
        if max == expected {
            0.0
        } else {
            (index - expected) / (max - expected)
        }
    };
    Ok(MetricValue::new(MetricName::Ari, value))
}

/// Calinski-Harabasz index over the non-noise points. Zero within-cluster
/// dispersion returns `f64::INFINITY`.
pub fn calinski_harabasz(x: &Matrix, labels: &[i64]) -> Result<MetricValue> {
    same_len(x.rows(), labels.len())?;
    let kept: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != -1).collect();
    let n = kept.len();
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for &i in &kept {
        groups.entry(labels[i]).or_default().push(i);
    }
    let k = groups.len();
    if k < 2 || k >= n {
        return Err(Error::UndefinedMetric(format!(
            "Calinski-Harabasz needs 2 <= clusters < points, got {k} clusters over {n} points"
        )));
    }
    let d = x.cols();
    let centroid = |rows: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; d];
        for &i in rows {
            for (s, v) in c.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        c.iter_mut().for_each(|s| *s /= rows.len() as f64);
        c
    };
    let overall = centroid(&kept);
    let mut between = 0.0;
    let mut within = 0.0;
    for rows in groups.values() {
        let c = centroid(rows);
        between += rows.len() as f64 * crate::linalg::squared_distance(&c, &overall);
        within += rows.iter().map(|&i| crate::linalg::squared_distance(x.row(i), &c)).sum::<f64>();
    }
    let value = if within == 0.0 {
        f64::INFINITY
    } else {
        (between / (k - 1) as f64) / (within / (n - k) as f64)
    };
    Ok(MetricValue::new(MetricName::CalinskiHarabasz, value))
}

/// Scores a prediction against ground truth. For outlier tasks `truth` is
/// 0/1 with 1 marking an outlier; F1 thresholds at the true contamination.
pub fn score_prediction(metric: MetricName, x: &Matrix, pred: &Prediction, truth: &[i64]) -> Result<MetricValue> {
    match (metric, pred) {
        (MetricName::RocAuc, Prediction::Scores(s)) => roc_auc(&s.scores, &binary(truth)),
        (MetricName::F1, Prediction::Scores(s)) => {
            let labels = binary(truth);
            let contamination = labels.iter().filter(|&&l| l).count() as f64 / labels.len().max(1) as f64;
            f1_binary(&top_fraction(&s.scores, contamination), &labels)
        }
        (MetricName::Ami, Prediction::Labels(l)) => ami(&l.labels, truth),
        (MetricName::Ari, Prediction::Labels(l)) => ari(&l.labels, truth),
        (MetricName::CalinskiHarabasz, Prediction::Labels(l)) => calinski_harabasz(x, &l.labels),
        (m, _) => Err(Error::InvalidParameter(format!("metric {m} does not apply to this prediction"))),
    }
}

fn binary(truth: &[i64]) -> Vec<bool> {
    truth.iter().map(|&t| t != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.2, 0.1];
        assert_eq!(roc_auc(&s, &[true, true, false, false]).unwrap().value, 1.0);
        assert_eq!(roc_auc(&s, &[false, false, true, true]).unwrap().value, 0.0);
        let tied = [0.5, 0.5, 0.5, 0.1];
        assert_eq!(roc_auc(&tied, &[true, false, true, false]).unwrap().value, 0.75);
        assert!(roc_auc(&s, &[true; 4]).is_err());
    }

    #[test]
    fn f1_examples() {
        let l = [true, false, true, false];
        assert_eq!(f1_binary(&l, &l).unwrap().value, 1.0);
        assert_eq!(f1_binary(&[false, true, false, true], &l).unwrap().value, 0.0);
        assert_eq!(f1_binary(&[true, true, false, false], &l).unwrap().value, 0.5);
        assert_eq!(f1_binary(&[false; 4], &l).unwrap().value, 0.0);
    }

    #[test]
    fn top_fraction_rounds_up() {
        let p = top_fraction(&[0.1, 0.9, 0.5, 0.7], 0.3);
        assert_eq!(p, vec![false, true, false, true]);
        assert_eq!(top_fraction(&[1.0, 1.0, 1.0], 0.2), vec![true, false, false]);
    }

    #[test]
    fn ami_examples() {
        assert!((ami(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(ami(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap().value, 0.0);
        // E[MI] = ln2 / 3 and MI = 0, so (0 - ln2/3) / (ln2 - ln2/3)
        assert!((ami(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[3, 3, 1, 2], &[0, 0, 5, 6]).unwrap().value, 1.0);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().value + 0.5).abs() < 1e-12);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn ch_examples() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [10.0], [10.1]]);
        let v = calinski_harabasz(&x, &[0, 0, 1, 1]).unwrap().value;
        assert!((v - 20000.0).abs() < 1e-6 * 20000.0);
        assert!(calinski_harabasz(&x, &[0, 1, 2, 3]).is_err());
        assert!(calinski_harabasz(&x, &[0, 0, 0, 0]).is_err());
        let y = Matrix::from_rows(&[[0.0], [0.0], [1.0], [1.0]]);
        assert_eq!(calinski_harabasz(&y, &[0, 0, 1, 1]).unwrap().value, f64::INFINITY);
        // noise is dropped before counting clusters
        let z = Matrix::from_rows(&[[0.0], [0.1], [10.0], [10.1], [50.0]]);
        assert_eq!(calinski_harabasz(&z, &[0, 0, 1, 1, -1]).unwrap().value, v);
    }

    #[test]
    fn names_round_trip() {
        for m in MetricName::ALL {
            assert_eq!(MetricName::parse(m.as_str()).unwrap(), m);
        }
    }
}
