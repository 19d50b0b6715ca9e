use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Coupling, CostMatrix, ProbabilityVector};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub eps: f64,
    pub max_iter: usize,
    /// Stop once the largest marginal violation falls below this.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            eps: 1e-2,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOutput {
    pub coupling: Coupling,
    /// Linear transport cost `<C, P>`.
    pub cost: f64,
    /// `<C, P> - eps * H(P)` with `H` the Shannon entropy.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Entropic OT between `a` and `b` by alternating dual updates in the log domain.
pub fn sinkhorn(
    c: &CostMatrix,
    a: &ProbabilityVector,
    b: &ProbabilityVector,
    cfg: &SinkhornConfig,
) -> Result<SinkhornOutput> {
    if c.rows() != a.len() || c.cols() != b.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "cost is {}x{}, marginals are {} and {}",
            c.rows(),
            c.cols(),
            a.len(),
            b.len()
        )));
    }
    solve(c.matrix(), a.as_slice(), b.as_slice(), cfg)
}

pub(crate) fn solve(c: &Matrix, a: &[f64], b: &[f64], cfg: &SinkhornConfig) -> Result<SinkhornOutput> {
    let (n, m) = c.shape();
    let mut duals = (vec![0.0; n], vec![0.0; m]);
    solve_from(c, a, b, cfg, &mut duals)
}

/// As `solve`, starting from and updating the potentials `(f, g)`.
pub(crate) fn solve_from(
    c: &Matrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    duals: &mut (Vec<f64>, Vec<f64>),
) -> Result<SinkhornOutput> {
    if !(cfg.eps > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("eps must be positive, got {}", cfg.eps)));
    }
    let (n, m) = c.shape();
    let eps = cfg.eps;
    let log_a: Vec<f64> = a.iter().map(|&x| math::ln(x)).collect();
    let log_b: Vec<f64> = b.iter().map(|&x| math::ln(x)).collect();
    let (f, g) = duals;
    // zero-weight points carry -inf potentials, which must not be reused
    for x in f.iter_mut().chain(g.iter_mut()) {
        if !x.is_finite() {
            *x = 0.0;
        }
    }
    // potentials and costs in units of eps; the transpose keeps the column
    // pass contiguous
    let ce = c.map(|x| x / eps);
    let ct = ce.transpose();
    let mut fe: Vec<f64> = f.iter().map(|x| x / eps).collect();
    let mut ge: Vec<f64> = g.iter().map(|x| x / eps).collect();
    let mut lse_rows = vec![0.0; n];
    let mut buf = vec![0.0; n.max(m)];

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // ln sum_j exp(g_j - C_ij); the same quantity gives both the current
        // row marginals and the next f update.
        for i in 0..n {
            lse_rows[i] = lse_shifted(&ge, ce.row(i), &mut buf[..m]);
        }
        if iterations > 0 {
            let err = (0..n)
                .map(|i| (math::exp(fe[i] + lse_rows[i]) - a[i]).abs())
                .fold(0.0, f64::max);
            if err.is_nan() {
                return Err(Error::SolverFailure { eps });
            }
            if err < cfg.tol {
                converged = true;
                break;
            }
        }
        if iterations >= cfg.max_iter {
            break;
        }
        for i in 0..n {
            fe[i] = log_a[i] - lse_rows[i];
        }
        for j in 0..m {
            ge[j] = log_b[j] - lse_shifted(&fe, ct.row(j), &mut buf[..n]);
        }
        if fe.iter().chain(&ge).any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::SolverFailure { eps });
        }
        iterations += 1;
    }
    for (x, &v) in f.iter_mut().zip(&fe) {
        *x = eps * v;
    }
    for (x, &v) in g.iter_mut().zip(&ge) {
        *x = eps * v;
    }

    let plan = Matrix::from_fn(n, m, |i, j| math::exp((f[i] + g[j] - c[(i, j)]) / eps));
    if !plan.is_finite() {
        return Err(Error::SolverFailure { eps });
    }
    let cost = plan.frobenius_dot(c);
    let neg_entropy: f64 = plan
        .as_slice()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * math::ln(p))
        .sum();
    Ok(SinkhornOutput {
        coupling: Coupling::from_plan(plan, a, b),
        cost,
        objective: cost + eps * neg_entropy,
        iterations,
        converged,
    })
}

/// `ln sum_k exp(p_k - c_k)`
fn lse_shifted(p: &[f64], c: &[f64], buf: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for ((v, &pk), &ck) in buf.iter_mut().zip(p).zip(c) {
        *v = pk - ck;
        max = max.max(*v);
    }
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = buf.iter().map(|&v| math::exp(v - max)).sum();
    max + math::ln(sum)
}
