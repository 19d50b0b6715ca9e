//! Optimal transport: log-domain Sinkhorn, the Gromov-Wasserstein energy,
//! and two GW solvers (entropic and low-rank).

mod energy;
mod entropic;
mod lowrank;
mod sinkhorn;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::math;

pub use energy::gw_energy;
pub use entropic::{entropic_gw, EntropicGwConfig};
pub use lowrank::{gw_lowrank, GwSpace, LowRankGwConfig};
pub use sinkhorn::{sinkhorn, SinkhornConfig, SinkhornOutput};

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "probability weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probability weights sum to {total}, not 1"
            )));
        }
        Ok(ProbabilityVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityVector(alloc::vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A finite cost matrix. Intra-space costs (GW inputs) are also symmetric
/// with a zero diagonal; [`CostMatrix::check_intra`] verifies that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix(Matrix);

impl CostMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidParameter("cost matrix has non-finite entries".into()));
        }
        Ok(CostMatrix(m))
    }

    /// Pairwise squared Euclidean distances between the rows of `points`.
    pub fn squared_euclidean(points: &Matrix) -> Self {
        let n = points.rows();
        CostMatrix(Matrix::from_fn(n, n, |i, j| {
            squared_distance(points.row(i), points.row(j))
        }))
    }

    pub fn euclidean(points: &Matrix) -> Self {
        let mut c = Self::squared_euclidean(points);
        c.0.as_mut_slice().iter_mut().for_each(|x| *x = math::sqrt(*x));
        c
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn scaled(&self, c: f64) -> Self {
        CostMatrix(self.0.map(|x| c * x))
    }

    pub fn check_intra(&self) -> Result<()> {
        let n = self.rows();
        if n != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "intra-space cost must be square, got {}x{}",
                n,
                self.cols()
            )));
        }
        let scale = self.0.max_abs().max(1.0);
        for i in 0..n {
            if self.0[(i, i)].abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter("intra-space cost needs a zero diagonal".into()));
            }
            for j in (i + 1)..n {
                if (self.0[(i, j)] - self.0[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter("intra-space cost must be symmetric".into()));
                }
            }
        }
        Ok(())
    }
}

/// A dense transport plan with its worst marginal violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub plan: Matrix,
    pub marginal_error: f64,
}

impl Coupling {
    pub fn from_plan(plan: Matrix, a: &[f64], b: &[f64]) -> Self {
        let marginal_error = marginal_violation(&plan.row_sums(), a)
            .max(marginal_violation(&plan.col_sums(), b));
        Coupling {
            plan,
            marginal_error,
        }
    }
}

pub(crate) fn marginal_violation(sums: &[f64], target: &[f64]) -> f64 {
    sums.iter()
        .zip(target)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max)
}

/// Plan factored as `Q · diag(1/g) · Rᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankCoupling {
    pub q: Matrix,
    pub r: Matrix,
    pub g: Vec<f64>,
}

impl LowRankCoupling {
    pub fn rank(&self) -> usize {
        self.g.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut scaled = self.q.clone();
        for i in 0..scaled.rows() {
            for (x, g) in scaled.row_mut(i).iter_mut().zip(&self.g) {
                *x /= g;
            }
        }
        scaled.matmul_t(&self.r)
    }

    /// Largest violation among `Q1 = a`, `R1 = b`, `Qᵀ1 = g` and `Rᵀ1 = g`.
    pub fn marginal_error(&self, a: &[f64], b: &[f64]) -> f64 {
        marginal_violation(&self.q.row_sums(), a)
            .max(marginal_violation(&self.r.row_sums(), b))
            .max(marginal_violation(&self.q.col_sums(), &self.g))
            .max(marginal_violation(&self.r.col_sums(), &self.g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GwCoupling {
    Dense(Coupling),
    LowRank(LowRankCoupling),
}

impl GwCoupling {
    pub fn to_dense(&self) -> Matrix {
        match self {
            GwCoupling::Dense(c) => c.plan.clone(),
            GwCoupling::LowRank(lr) => lr.to_dense(),
        }
    }
}

/// Solver output. `value` is the GW energy of `coupling`, without any
/// entropic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwResult {
    pub value: f64,
    pub coupling: GwCoupling,
    pub iterations: usize,
    pub converged: bool,
}
