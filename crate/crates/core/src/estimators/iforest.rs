use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng;

const MAX_SAMPLES: usize = 256;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: usize, right: usize },
}

/// Isolation forest. Each tree sees `min(256, n)` rows drawn without
/// replacement and `max(1, floor(max_features * d))` features; scores are
/// `2^(-E[h] / c(psi))`.
pub fn fit(x: &Matrix, n_estimators: usize, max_features: f64, seed: u64) -> Result<Vec<f64>> {
    if !(max_features > 0.0 && max_features <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max_features must lie in (0, 1], got {max_features}"
        )));
    }
    let (n, d) = x.shape();
    let psi = n.min(MAX_SAMPLES);
    let n_features = ((max_features * d as f64) as usize).max(1);
    let height_limit = math::ceil(math::log2(psi as f64)) as usize;
    let mut depth_sum = vec![0.0; n];
    for t in 0..n_estimators {
        let mut rng = rng::rng(rng::derive_seed(seed, t as u64));
        let rows = index::sample(&mut rng, n, psi).into_vec();
        let features = index::sample(&mut rng, d, n_features).into_vec();
        let mut nodes = Vec::new();
        grow(x, rows, &features, 0, height_limit, &mut rng, &mut nodes);
        for (i, s) in depth_sum.iter_mut().enumerate() {
            *s += path_length(&nodes, x.row(i));
        }
    }
    let norm = average_path(psi);
    Ok(depth_sum
        .into_iter()
        .map(|s| {
            let mean = s / n_estimators.max(1) as f64;
            if norm > 0.0 {
                math::powf(2.0, -mean / norm)
            } else {
                0.5
            }
        })
        .collect())
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// keys.
fn average_path(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (math::ln(m) + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

fn grow<R: Rng>(
    x: &Matrix,
    rows: Vec<usize>,
    features: &[usize],
    depth: usize,
    limit: usize,
    rng: &mut R,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { size: rows.len() });
    if depth >= limit || rows.len() <= 1 {
        return id;
    }
    // features in random order; the first one that varies here is split
    let order = index::sample(rng, features.len(), features.len()).into_vec();
    for k in order {
        let f = features[k];
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(x[(i, f)]), hi.max(x[(i, f)])));
        if lo == hi {
            continue;
        }
        let value = rng.random_range(lo..hi);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, f)] < value);
        let left = grow(x, left_rows, features, depth + 1, limit, rng, nodes);
        let right = grow(x, right_rows, features, depth + 1, limit, rng, nodes);
        nodes[id] = Node::Split { feature: f, value, left, right };
        return id;
    }
    id
}

fn path_length(nodes: &[Node], p: &[f64]) -> f64 {
    let mut id = 0;
    let mut depth = 0.0;
    loop {
        match nodes[id] {
            Node::Leaf { size } => return depth + average_path(size),
            Node::Split { feature, value, left, right } => {
                id = if p[feature] < value { left } else { right };
                depth += 1.0;
            }
        }
    }
}
