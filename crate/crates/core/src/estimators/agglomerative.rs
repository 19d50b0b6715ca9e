use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::distance::{pairwise, Affinity};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Ward,
    Complete,
    Average,
    Single,
}

impl Linkage {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ward" => Ok(Linkage::Ward),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            other => Err(Error::InvalidParameter(format!("unknown linkage {other}"))),
        }
    }
}

/// Bottom-up merging cut at `k` clusters. Labels are numbered in order of
/// first appearance.
pub fn fit(x: &Matrix, k: usize, linkage: Linkage, affinity: Affinity) -> Result<Vec<i64>> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("n_clusters = {k} must lie in 1..={n}")));
    }
    if linkage == Linkage::Ward && affinity != Affinity::Euclidean {
        return Err(Error::InvalidParameter("ward linkage needs euclidean affinity".into()));
    }
    // ward runs on squared distances, where its update is linear
    let d = match linkage {
        Linkage::Ward => pairwise(x, squared_distance),
        _ => pairwise(x, |a, b| affinity.distance(a, b)),
    };
    let mut merges = nn_chain(d, n, linkage);
    merges.sort_by(|a, b| a.2.total_cmp(&b.2));

    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b, _) in merges.iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut ids: Vec<Option<i64>> = vec![None; n];
    let mut next = 0;
    Ok((0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            *ids[root].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect())
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Nearest-neighbor chain over a dense dissimilarity matrix. Returns the
/// `n - 1` merges as (representative a, representative b, height), in the
/// order found; all four linkages are reducible, so sorting by height gives
/// a valid dendrogram.
fn nn_chain(mut d: Vec<f64>, n: usize, linkage: Linkage) -> Vec<(usize, usize, f64)> {
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while merges.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster remains"));
        }
        let a = *chain.last().expect("chain is non-empty");
        let prev = chain.len().checked_sub(2).map(|i| chain[i]);
        // ties go to the previous chain element so the chain always closes
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if !active[j] || j == a {
                continue;
            }
            let v = d[a * n + j];
            if v < best.0 || (v == best.0 && Some(j) == prev) {
                best = (v, j);
            }
        }
        let (height, b) = best;
        if Some(b) == prev {
            chain.truncate(chain.len() - 2);
            let (keep, gone) = (a.min(b), a.max(b));
            let (na, nb) = (size[a] as f64, size[b] as f64);
            let dab = d[a * n + b];
            for j in 0..n {
                if !active[j] || j == a || j == b {
                    continue;
                }
                let (da, db) = (d[a * n + j], d[b * n + j]);
                let nj = size[j] as f64;
                let v = match linkage {
                    Linkage::Single => da.min(db),
                    Linkage::Complete => da.max(db),
                    Linkage::Average => (na * da + nb * db) / (na + nb),
                    Linkage::Ward => ((na + nj) * da + (nb + nj) * db - nj * dab) / (na + nb + nj),
                };
                d[keep * n + j] = v;
                d[j * n + keep] = v;
            }
            size[keep] += size[gone];
            active[gone] = false;
            merges.push((keep, gone, height));
        } else {
            chain.push(b);
        }
    }
    merges
}
