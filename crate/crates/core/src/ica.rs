//! FastICA embedding: eigen-whitening followed by symmetric fixed-point
//! iterations with the log-cosh contrast.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::NumericMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::math;
use crate::rng;

/// Component count used when none is configured: `min(d, 20)`.
pub fn default_components(d: usize) -> usize {
    d.min(20)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    pub components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl IcaConfig {
    pub fn new(components: usize, seed: u64) -> Self {
        IcaConfig {
            components,
            max_iter: 200,
            tol: 1e-4,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    pub mean: Vec<f64>,
    /// k×d, maps centered rows to whitened coordinates.
    pub whitening: Matrix,
    /// k×k with orthonormal rows.
    pub unmixing: Matrix,
    pub k: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn fit_ica(m: &NumericMatrix, cfg: &IcaConfig) -> Result<IcaModel> {
    let (n, d) = (m.n(), m.d());
    let k = cfg.components;
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "component count {k} must lie in 1..={d}"
        )));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "need more rows ({n}) than components ({k})"
        )));
    }

    let mut x = m.data().clone();
    let mean = x.center_columns();
    let cov = x.gram_over_n();
    let (values, vectors) = symmetric_eigen(&cov);
    let top = values[0].max(0.0);
    let rank = values.iter().filter(|&&v| v > 1e-10 * top && v > 1e-300).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, requested: k });
    }
    let whitening = Matrix::from_fn(k, d, |c, j| vectors[(j, c)] / math::sqrt(values[c]));
    let z = x.matmul_t(&whitening);

    let mut rng = rng::rng(cfg.seed);
    let init = Matrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let next = symmetric_decorrelation(&fixed_point_step(&z, &w));
        let lim = (0..k)
            .map(|i| (dot(next.row(i), w.row(i)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(IcaModel {
        mean,
        whitening,
        unmixing: w,
        k,
        seed: cfg.seed,
        iterations,
        converged,
    })
}

/// `E[z g(wᵀz)] − E[g'(wᵀz)] w` for every row `w`, with `g = tanh`.
fn fixed_point_step(z: &Matrix, w: &Matrix) -> Matrix {
    let (n, k) = z.shape();
    let y = z.matmul_t(w);
    let g = y.map(math::tanh);
    let mut out = g.t_matmul(z);
    out.scale(1.0 / n as f64);
    for c in 0..k {
        let mean_deriv = (0..n).map(|i| 1.0 - g[(i, c)] * g[(i, c)]).sum::<f64>() / n as f64;
        for j in 0..k {
            out[(c, j)] -= mean_deriv * w[(c, j)];
        }
    }
    out
}

/// `(W Wᵀ)^{-1/2} W`
fn symmetric_decorrelation(w: &Matrix) -> Matrix {
    let (values, vectors) = symmetric_eigen(&w.matmul_t(w));
    let k = values.len();
    let inv_sqrt = Matrix::from_fn(k, k, |i, j| {
        (0..k)
            .map(|c| vectors[(i, c)] * vectors[(j, c)] / math::sqrt(values[c].max(1e-300)))
            .sum()
    });
    inv_sqrt.matmul(w)
}

impl IcaModel {
    /// Rows of the full unmixing map `unmixing · whitening` (k×d).
    pub fn components(&self) -> Matrix {
        self.unmixing.matmul(&self.whitening)
    }

    pub fn transform(&self, m: &NumericMatrix) -> Result<NumericMatrix> {
        if m.d() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} columns, got {}",
                self.mean.len(),
                m.d()
            )));
        }
        let mut x = m.data().clone();
        for i in 0..x.rows() {
            for (v, mu) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= mu;
            }
        }
        let out = x.matmul_t(&self.components());
        NumericMatrix::new(out, m.source_id())
    }
}
