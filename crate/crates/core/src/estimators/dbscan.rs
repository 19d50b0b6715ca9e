use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{minkowski_distance, Matrix};

const NOISE: i64 = -1;

/// Density clustering with Minkowski-`p` neighborhoods of radius `eps`
/// (inclusive). A point is core when its neighborhood, itself included,
/// holds at least `min_samples` points. Clusters are numbered in order of
/// their lowest core point; a border point joins the first cluster that
/// reaches it.
pub fn fit(x: &Matrix, eps: f64, min_samples: usize, p: f64) -> Result<Vec<i64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let n = x.rows();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| minkowski_distance(x.row(i), x.row(j), p) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels = vec![NOISE; n];
    let mut cluster = 0;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = cluster;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if labels[j] == NOISE {
                    labels[j] = cluster;
                    if core[j] {
                        queue.push_back(j);
                    }
                }
            }
        }
        cluster += 1;
    }
    Ok(labels)
}
