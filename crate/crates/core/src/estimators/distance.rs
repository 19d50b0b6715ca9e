use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;

/// Point-to-point dissimilarity. `l1` and `l2` are aliases of manhattan
/// and euclidean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Affinity {
    Euclidean,
    Manhattan,
    Cosine,
}

impl Affinity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Affinity::Euclidean),
            "manhattan" | "l1" => Ok(Affinity::Manhattan),
            "cosine" => Ok(Affinity::Cosine),
            other => Err(Error::InvalidParameter(format!("unknown affinity {other}"))),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Affinity::Euclidean => math::sqrt(linalg::squared_distance(a, b)),
            Affinity::Manhattan => linalg::minkowski_distance(a, b, 1.0),
            Affinity::Cosine => {
                let na = math::sqrt(linalg::dot(a, a));
                let nb = math::sqrt(linalg::dot(b, b));
                // a zero vector has no direction; treat it as orthogonal
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    (1.0 - linalg::dot(a, b) / (na * nb)).max(0.0)
                }
            }
        }
    }
}

/// Row-major `n×n` matrix of pairwise distances.
pub fn pairwise(x: &Matrix, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let n = x.rows();
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = f(x.row(i), x.row(j));
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Neighbors of each row sorted by (distance, index), self excluded.
pub fn sorted_neighbors(d: &[f64], n: usize) -> Vec<Vec<(f64, usize)>> {
    (0..n)
        .map(|i| {
            let mut row: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d[i * n + j], j)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            row
        })
        .collect()
}
