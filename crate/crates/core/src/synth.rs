//! Seeded synthetic datasets with ground truth, and random isometries.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::math;
use crate::rng;

fn normal<R: Rng>(r: &mut R) -> f64 {
    StandardNormal.sample(r)
}

/// `k` isotropic Gaussian clusters with centers drawn in `[-10, 10]^d`.
/// Points are assigned round-robin, so cluster sizes differ by at most one.
pub fn blobs(n: usize, d: usize, k: usize, spread: f64, seed: u64) -> (Matrix, Vec<i64>) {
    let mut r = rng::rng(seed);
    let centers = Matrix::from_fn(k, d, |_, _| r.random_range(-10.0..10.0));
    let labels: Vec<i64> = (0..n).map(|i| (i % k) as i64).collect();
    let x = Matrix::from_fn(n, d, |i, j| centers[(i % k, j)] + spread * normal(&mut r));
    (x, labels)
}

/// Concentric circles of radius 1..=k in the first two coordinates; the
/// other coordinates are small noise.
pub fn rings(n: usize, d: usize, k: usize, noise: f64, seed: u64) -> (Matrix, Vec<i64>) {
    let mut r = rng::rng(seed);
    let labels: Vec<i64> = (0..n).map(|i| (i % k) as i64).collect();
    let mut x = Matrix::zeros(n, d.max(2));
    for i in 0..n {
        let radius = (i % k + 1) as f64;
        let t = r.random_range(0.0..2.0 * PI);
        x[(i, 0)] = radius * math::cos(t) + noise * normal(&mut r);
        x[(i, 1)] = radius * math::sin(t) + noise * normal(&mut r);
        for j in 2..d {
            x[(i, j)] = noise * normal(&mut r);
        }
    }
    (x, labels)
}

/// Elongated Gaussian clusters stacked along one axis: each cluster is
/// long in the first coordinate and thin in the rest.
pub fn stripes(n: usize, d: usize, k: usize, seed: u64) -> (Matrix, Vec<i64>) {
    let mut r = rng::rng(seed);
    let labels: Vec<i64> = (0..n).map(|i| (i % k) as i64).collect();
    let x = Matrix::from_fn(n, d.max(2), |i, j| match j {
        0 => 6.0 * normal(&mut r),
        1 => 3.0 * (i % k) as f64 + 0.3 * normal(&mut r),
        _ => 0.3 * normal(&mut r),
    });
    (x, labels)
}

pub fn uniform(n: usize, d: usize, seed: u64) -> Matrix {
    let mut r = rng::rng(seed);
    Matrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))
}

/// Standard-normal inliers plus `ceil(contamination * n)` points spread
/// uniformly over a shell at radius 4..8; label 1 marks an outlier.
pub fn outliers(n: usize, d: usize, contamination: f64, seed: u64) -> (Matrix, Vec<i64>) {
    let mut r = rng::rng(seed);
    let m = (math::ceil(contamination * n as f64) as usize).min(n);
    let mut x = Matrix::from_fn(n, d, |_, _| normal(&mut r));
    let mut labels = alloc::vec![0i64; n];
    for i in n - m..n {
        let norm = math::sqrt(x.row(i).iter().map(|v| v * v).sum::<f64>()).max(1e-12);
        let radius = r.random_range(4.0..8.0);
        x.row_mut(i).iter_mut().for_each(|v| *v *= radius / norm);
        labels[i] = 1;
    }
    (x, labels)
}

/// Haar-random orthogonal matrix (Gram-Schmidt on a Gaussian matrix).
pub fn rotation(d: usize, seed: u64) -> Matrix {
    let mut r = rng::rng(seed);
    let mut q = Matrix::from_fn(d, d, |_, _| normal(&mut r));
    for i in 0..d {
        for k in 0..i {
            let proj: f64 = (0..d).map(|j| q[(i, j)] * q[(k, j)]).sum();
            for j in 0..d {
                q[(i, j)] -= proj * q[(k, j)];
            }
        }
        let norm = math::sqrt((0..d).map(|j| q[(i, j)] * q[(i, j)]).sum());
        for j in 0..d {
            q[(i, j)] /= norm;
        }
    }
    q
}

/// Rows shuffled, rotated by a random orthogonal map, and translated.
/// Returns the new matrix and the permutation (`out[i] = x[perm[i]] ...`).
pub fn isometry(x: &Matrix, seed: u64) -> (Matrix, Vec<usize>) {
    let (n, d) = x.shape();
    let mut r = rng::rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    let shift: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
    let q = rotation(d, rng::derive_seed(seed, 1));
    let moved = x.select_rows(&perm).matmul_t(&q);
    let out = Matrix::from_fn(n, d, |i, j| moved[(i, j)] + shift[j]);
    (out, perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_orthogonal() {
        let q = rotation(5, 3);
        let g = q.matmul_t(&q);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isometry_keeps_distances() {
        let x = uniform(12, 4, 1);
        let (y, perm) = isometry(&x, 2);
        for a in 0..12 {
            for b in 0..12 {
                let dx = crate::linalg::squared_distance(x.row(perm[a]), x.row(perm[b]));
                let dy = crate::linalg::squared_distance(y.row(a), y.row(b));
                assert!((dx - dy).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn outlier_count() {
        let (_, l) = outliers(100, 3, 0.05, 4);
        assert_eq!(l.iter().filter(|&&v| v == 1).count(), 5);
    }
}
