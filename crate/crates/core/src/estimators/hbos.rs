use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Histogram-based score: per feature, an equal-width density histogram
/// over the observed range; a point scores `-sum ln(density + alpha)` over
/// the bins it falls in. A constant feature gets one unit-width range
/// centered on its value.
pub fn fit(x: &Matrix, n_bins: usize, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (n, d) = x.shape();
    let mut scores = vec![0.0; n];
    for j in 0..d {
        let col = x.column(j);
        let (mut lo, mut hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / n_bins as f64;
        let bin = |v: f64| (((v - lo) / width) as usize).min(n_bins - 1);
        let mut counts = vec![0usize; n_bins];
        for &v in &col {
            counts[bin(v)] += 1;
        }
        let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
        for (s, &v) in scores.iter_mut().zip(&col) {
            *s -= math::ln(density[bin(v)] + alpha);
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_feature_scores_equal() {
        let x = Matrix::filled(6, 1, 3.0);
        let s = fit(&x, 10, 0.1).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
    }

    #[test]
    fn isolated_value_scores_highest() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.05], [0.02], [0.08], [10.0]]);
        let s = fit(&x, 10, 0.1).unwrap();
        let top = (0..6).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(top, 5);
    }

    #[test]
    fn hand_density() {
        // two bins over [0, 1]: counts 3 and 1, width 0.5, n = 4
        // densities 1.5 and 0.5
        let x = Matrix::from_rows(&[[0.0], [0.2], [0.4], [1.0]]);
        let s = fit(&x, 2, 0.5).unwrap();
        assert!((s[0] + math::ln(2.0)).abs() < 1e-12);
        assert!((s[3] + math::ln(1.0)).abs() < 1e-12);
    }
}
