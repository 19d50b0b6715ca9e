use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::rng;

/// Lloyd iterations from a k-means++ seeding. Stops when assignments stop
/// changing or after `max_iter` passes.
pub fn fit(x: &Matrix, k: usize, max_iter: usize, seed: u64) -> Result<Vec<i64>> {
    let (n, d) = x.shape();
    if k > n {
        return Err(Error::InvalidParameter(format!("n_clusters = {k} exceeds the {n} rows")));
    }
    let mut centers = plus_plus(x, k, seed);
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..n {
            let best = nearest(x.row(i), &centers).0;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, v) in sums.row_mut(assign[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        // an emptied cluster takes over the point worst served by its center
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&i, &j| {
                        let di = squared_distance(x.row(i), centers.row(assign[i]));
                        let dj = squared_distance(x.row(j), centers.row(assign[j]));
                        di.total_cmp(&dj).then(j.cmp(&i))
                    });
                if let Some(i) = far {
                    counts[assign[i]] -= 1;
                    counts[c] = 1;
                    assign[i] = c;
                    centers.row_mut(c).copy_from_slice(x.row(i));
                }
            }
        }
    }
    Ok(assign.into_iter().map(|a| a as i64).collect())
}

fn nearest(p: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centers.row_iter().enumerate() {
        let d = squared_distance(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// First center uniform, each next one drawn with probability proportional
/// to the squared distance to the closest chosen center.
fn plus_plus(x: &Matrix, k: usize, seed: u64) -> Matrix {
    let n = x.rows();
    let mut rng = rng::rng(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| squared_distance(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            // every point coincides with a center; take unused rows in order
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}
