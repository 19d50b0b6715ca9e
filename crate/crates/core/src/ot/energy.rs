use alloc::format;

use super::CostMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// `sum_{i,j,i',j'} (A[i,i'] - B[j,j'])^2 P[i,j] P[i',j']`, evaluated through
/// the expansion `pᵀ(A∘A)p + qᵀ(B∘B)q - 2<A P Bᵀ, P>` with `p = P1`,
/// `q = Pᵀ1`. Cost is `O(n²m + nm²)`.
pub fn gw_energy(a: &CostMatrix, b: &CostMatrix, p: &Matrix) -> Result<f64> {
    let (n, m) = p.shape();
    if a.rows() != n || a.cols() != n || b.rows() != m || b.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}, P is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            n,
            m
        )));
    }
    Ok(dense_energy(a.matrix(), b.matrix(), p))
}

pub(crate) fn dense_energy(a: &Matrix, b: &Matrix, p: &Matrix) -> f64 {
    let row_mass = p.row_sums();
    let col_mass = p.col_sums();
    let a_sq = a.map(|x| x * x);
    let b_sq = b.map(|x| x * x);
    let t1 = dot(&row_mass, &a_sq.mul_vec(&row_mass));
    let t2 = dot(&col_mass, &b_sq.mul_vec(&col_mass));
    let cross = a.matmul(p).matmul_t(b).frobenius_dot(p);
    (t1 + t2 - 2.0 * cross).max(0.0)
}
