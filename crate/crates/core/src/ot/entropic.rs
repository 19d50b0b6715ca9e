use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::energy::dense_energy;
use super::sinkhorn::{self, SinkhornConfig};
use super::{CostMatrix, Coupling, GwCoupling, GwResult, ProbabilityVector};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::math;

/// Inner iteration cap per outer step. The potentials carry over between
/// steps, so only the last solve is run to `sinkhorn_tol`.
const STEP_INNER_ITER: usize = 500;

const ECCENTRICITY_MIX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicGwConfig {
    pub eps: f64,
    pub outer_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub sinkhorn_max_iter: usize,
    pub sinkhorn_tol: f64,
    /// Log-scale of the seeded perturbation applied to the product
    /// initialization; a⊗b itself is a stationary point of the energy.
    pub init_noise: f64,
    /// Also descend from the eccentricity-sorted coupling and keep the
    /// lower energy.
    pub eccentricity_start: bool,
    /// Outer step `t` solves at `max(eps, spread * anneal^t)`, where
    /// `spread` is the range of the linearized cost; 0 disables this.
    /// Convergence is only declared once the schedule has reached `eps`.
    pub anneal: f64,
}

impl Default for EntropicGwConfig {
    fn default() -> Self {
        EntropicGwConfig {
            eps: 1e-2,
            outer_iter: 200,
            tol: 1e-6,
            seed: 0,
            sinkhorn_max_iter: 10_000,
            sinkhorn_tol: 1e-10,
            init_noise: 0.1,
            eccentricity_start: true,
            anneal: 0.6,
        }
    }
}

/// Entropic GW by projected mirror descent: each outer step linearizes the
/// energy at the current plan and solves the resulting entropic OT problem.
pub fn entropic_gw(
    a_cost: &CostMatrix,
    b_cost: &CostMatrix,
    a: &ProbabilityVector,
    b: &ProbabilityVector,
    cfg: &EntropicGwConfig,
) -> Result<GwResult> {
    a_cost.check_intra()?;
    b_cost.check_intra()?;
    let (n, m) = (a.len(), b.len());
    if a_cost.rows() != n || b_cost.rows() != m {
        return Err(Error::DimensionMismatch(format!(
            "costs are {}x{} and {}x{}, marginals are {} and {}",
            a_cost.rows(),
            a_cost.cols(),
            b_cost.rows(),
            b_cost.cols(),
            n,
            m
        )));
    }
    let (am, bm) = (a_cost.matrix(), b_cost.matrix());
    let (aw, bw) = (a.as_slice(), b.as_slice());

    // perturbed product plan, rescaled onto the marginals
    let mut r = rng::rng(cfg.seed);
    let noise = Matrix::from_fn(n, m, |_, _| {
        let z: f64 = StandardNormal.sample(&mut r);
        -cfg.init_noise * z
    });
    let start = sinkhorn::solve(&noise, aw, bw, &inner(cfg, 1.0))?.coupling.plan;
    let mut best = descend(am, bm, aw, bw, start, cfg, cfg.anneal)?;
    if cfg.eccentricity_start {
        let run = descend(am, bm, aw, bw, eccentricity_plan(am, bm, aw, bw), cfg, 0.0)?;
        if run.value < best.value {
            best = run;
        }
    }
    Ok(best)
}

fn inner(cfg: &EntropicGwConfig, eps: f64) -> SinkhornConfig {
    SinkhornConfig {
        eps,
        max_iter: cfg.sinkhorn_max_iter,
        tol: cfg.sinkhorn_tol,
    }
}

fn descend(
    am: &Matrix,
    bm: &Matrix,
    aw: &[f64],
    bw: &[f64],
    mut plan: Matrix,
    cfg: &EntropicGwConfig,
    anneal: f64,
) -> Result<GwResult> {
    let (n, m) = plan.shape();
    let mut value = dense_energy(am, bm, &plan);
    let mut duals = (vec![0.0; n], vec![0.0; m]);

    // row/column constant part of the gradient: 2(A²a 1ᵀ + 1 (B²b)ᵀ)
    let a_sq = am.map(|x| x * x);
    let b_sq = bm.map(|x| x * x);
    let row_term = a_sq.mul_vec(aw);
    let col_term = b_sq.mul_vec(bw);

    let mut last = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.outer_iter {
        iterations += 1;
        let cross = am.matmul(&plan).matmul_t(bm);
        let mut grad = Matrix::from_fn(n, m, |i, j| {
            2.0 * (row_term[i] + col_term[j] - 2.0 * cross[(i, j)])
        });
        let shift = grad.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        grad.as_mut_slice().iter_mut().for_each(|x| *x -= shift);

        let eps_t = if anneal > 0.0 {
            cfg.eps.max(grad.max_abs() * math::powi(anneal, iterations as i32))
        } else {
            cfg.eps
        };
        let mut solver = inner(cfg, eps_t);
        solver.max_iter = solver.max_iter.min(STEP_INNER_ITER);
        let step = sinkhorn::solve_from(&grad, aw, bw, &solver, &mut duals).map_err(|e| {
            Error::OuterIteration {
                iteration: iterations,
                source: Box::new(e),
            }
        })?;
        plan = step.coupling.plan;
        last = Some((grad, step.converged));
        let next = dense_energy(am, bm, &plan);
        let delta = (next - value).abs();
        let reference = value.max(1.0);
        value = next;
        if delta < cfg.tol * reference && eps_t == cfg.eps {
            converged = true;
            break;
        }
    }
    if let Some((grad, false)) = last {
        let step = sinkhorn::solve_from(&grad, aw, bw, &inner(cfg, cfg.eps), &mut duals).map_err(|e| {
            Error::OuterIteration {
                iteration: iterations,
                source: Box::new(e),
            }
        })?;
        plan = step.coupling.plan;
        value = dense_energy(am, bm, &plan);
    }

    Ok(GwResult {
        value,
        coupling: GwCoupling::Dense(Coupling::from_plan(plan, aw, bw)),
        iterations,
        converged,
    })
}

/// Monotone coupling of the two spaces sorted by eccentricity `(A a)_i`,
/// mixed with a little of `a ⊗ b` so every entry is positive.
fn eccentricity_plan(am: &Matrix, bm: &Matrix, aw: &[f64], bw: &[f64]) -> Matrix {
    let order = |c: &Matrix, w: &[f64]| {
        let ecc = c.mul_vec(w);
        let mut idx: Vec<usize> = (0..w.len()).collect();
        idx.sort_by(|&i, &j| ecc[i].total_cmp(&ecc[j]).then(i.cmp(&j)));
        idx
    };
    let (oa, ob) = (order(am, aw), order(bm, bw));
    let mut plan = Matrix::from_fn(aw.len(), bw.len(), |i, j| ECCENTRICITY_MIX * aw[i] * bw[j]);
    // north-west corner rule along the two orders
    let (mut i, mut j) = (0, 0);
    let (mut left_a, mut left_b) = (aw[oa[0]], bw[ob[0]]);
    while i < oa.len() && j < ob.len() {
        let mass = left_a.min(left_b);
        plan[(oa[i], ob[j])] += (1.0 - ECCENTRICITY_MIX) * mass;
        left_a -= mass;
        left_b -= mass;
        if left_a <= left_b {
            i += 1;
            if i < oa.len() {
                left_a = aw[oa[i]];
            }
        } else {
            j += 1;
            if j < ob.len() {
                left_b = bw[ob[j]];
            }
        }
    }
    plan
}
