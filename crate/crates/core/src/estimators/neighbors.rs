use alloc::format;
use alloc::vec::Vec;

use super::distance::{pairwise, sorted_neighbors, Affinity};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMethod {
    Largest,
    Mean,
    Median,
}

impl KnnMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(KnnMethod::Largest),
            "mean" => Ok(KnnMethod::Mean),
            "median" => Ok(KnnMethod::Median),
            other => Err(Error::InvalidParameter(format!("unknown KNN method {other}"))),
        }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k >= n {
        return Err(Error::InvalidParameter(format!(
            "n_neighbors = {k} must be below the {n} rows"
        )));
    }
    Ok(())
}

/// Score from the euclidean distances to the `k` nearest other points.
pub fn knn(x: &Matrix, k: usize, method: KnnMethod) -> Result<Vec<f64>> {
    let n = x.rows();
    check_k(k, n)?;
    let d = pairwise(x, |a, b| Affinity::Euclidean.distance(a, b));
    Ok(sorted_neighbors(&d, n)
        .into_iter()
        .map(|nb| {
            let mut dist: Vec<f64> = nb[..k].iter().map(|p| p.0).collect();
            match method {
                KnnMethod::Largest => dist[k - 1],
                KnnMethod::Mean => dist.iter().sum::<f64>() / k as f64,
                KnnMethod::Median => math::median(&mut dist),
            }
        })
        .collect())
}

/// Local outlier factor over exactly `k` neighbors per point.
pub fn lof(x: &Matrix, k: usize, metric: Affinity) -> Result<Vec<f64>> {
    let n = x.rows();
    check_k(k, n)?;
    let d = pairwise(x, |a, b| metric.distance(a, b));
    let nb: Vec<Vec<(f64, usize)>> = sorted_neighbors(&d, n).into_iter().map(|mut v| {
        v.truncate(k);
        v
    }).collect();
    let k_dist: Vec<f64> = nb.iter().map(|v| v[k - 1].0).collect();
    // the offset keeps duplicated points finite
    let lrd: Vec<f64> = nb
        .iter()
        .map(|v| {
            let reach: f64 = v.iter().map(|&(dist, o)| dist.max(k_dist[o])).sum();
            1.0 / (reach / k as f64 + 1e-10)
        })
        .collect();
    Ok(nb
        .iter()
        .enumerate()
        .map(|(i, v)| v.iter().map(|&(_, o)| lrd[o]).sum::<f64>() / (k as f64 * lrd[i]))
        .collect())
}
