//! Gromov-Wasserstein restricted to couplings `Q · diag(1/g) · Rᵀ`.
//!
//! Mirror descent on `(Q, R, g)`: each step multiplies the factors by
//! `exp(-step * gradient)` and projects back onto
//! `{Q1 = a, R1 = b, Qᵀ1 = Rᵀ1 = g}` by alternating KL projections onto the
//! two affine halves of that set. For point clouds the squared-Euclidean
//! cost is kept as `U Vᵀ` with `d + 2` columns, so nothing of size `n×n` is
//! ever formed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CostMatrix, GwCoupling, GwResult, LowRankCoupling, ProbabilityVector};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::rng;

/// Below this a component of `g` is considered collapsed.
const G_FLOOR: f64 = 1e-12;

/// Entries of the multiplicative updates never drop below this, which
/// keeps the KL projections well defined.
const ENTRY_FLOOR: f64 = 1e-300;


const MAX_STEP_GROWTH: f64 = 64.0;
const MIN_STEP_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub enum GwSpace<'a> {
    /// A symmetric intra-space cost with zero diagonal.
    Costs(&'a CostMatrix),
    /// Rows are points; the cost is their pairwise squared Euclidean distance.
    Points(&'a Matrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankGwConfig {
    pub rank: usize,
    /// Mirror step: the largest informative log-change per step.
    pub gamma: f64,
    pub outer_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub init_noise: f64,
    /// Independent seeded starts; the lowest-energy run is returned.
    pub restarts: usize,
    /// Also start from the coupling that matches points in order of their
    /// mean cost to the rest of their space.
    pub eccentricity_start: bool,
    pub projection_max_iter: usize,
    pub projection_tol: f64,
}

impl Default for LowRankGwConfig {
    fn default() -> Self {
        LowRankGwConfig {
            rank: 10,
            gamma: 10.0,
            outer_iter: 200,
            tol: 1e-6,
            seed: 0,
            init_noise: 0.3,
            restarts: 32,
            eccentricity_start: true,
            projection_max_iter: 20,
            projection_tol: 1e-8,
        }
    }
}

/// Intra-space cost `A`, either dense or as `U Vᵀ`.
enum Geometry {
    Dense(Matrix),
    Factored { u: Matrix, v: Matrix },
}

impl Geometry {
    fn from_space(space: GwSpace<'_>) -> Result<Self> {
        match space {
            GwSpace::Costs(c) => {
                c.check_intra()?;
                Ok(Geometry::Dense(c.matrix().clone()))
            }
            GwSpace::Points(p) => {
                if !p.is_finite() {
                    return Err(Error::InvalidParameter("point cloud has non-finite entries".into()));
                }
                let mut x = p.clone();
                x.center_columns();
                let (n, d) = x.shape();
                let sq: Vec<f64> = x.row_iter().map(|r| dot(r, r)).collect();
                let u = Matrix::from_fn(n, d + 2, |i, k| match k {
                    0 => sq[i],
                    1 => 1.0,
                    _ => -2.0 * x[(i, k - 2)],
                });
                let v = Matrix::from_fn(n, d + 2, |i, k| match k {
                    0 => 1.0,
                    1 => sq[i],
                    _ => x[(i, k - 2)],
                });
                Ok(Geometry::Factored { u, v })
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Geometry::Dense(a) => a.rows(),
            Geometry::Factored { u, .. } => u.rows(),
        }
    }

    /// `A · x`
    fn apply(&self, x: &Matrix) -> Matrix {
        match self {
            Geometry::Dense(a) => a.matmul(x),
            Geometry::Factored { u, v } => u.matmul(&v.t_matmul(x)),
        }
    }

    /// `pᵀ (A∘A) p`
    fn squared_form(&self, p: &[f64]) -> f64 {
        match self {
            Geometry::Dense(a) => {
                let sq = a.map(|x| x * x);
                dot(p, &sq.mul_vec(p))
            }
            Geometry::Factored { u, v } => {
                weighted_gram(u, p).frobenius_dot(&weighted_gram(v, p))
            }
        }
    }
}

/// `Xᵀ diag(w) X`
fn weighted_gram(x: &Matrix, w: &[f64]) -> Matrix {
    let k = x.cols();
    let mut out = Matrix::zeros(k, k);
    for (row, &wi) in x.row_iter().zip(w) {
        for a in 0..k {
            let s = wi * row[a];
            if s == 0.0 {
                continue;
            }
            for b in 0..k {
                out[(a, b)] += s * row[b];
            }
        }
    }
    out
}

/// Quantities shared by the energy and its gradient at one iterate.
struct Evaluation {
    value: f64,
    aq: Matrix,
    br: Matrix,
    qaq: Matrix,
    rbr: Matrix,
}

fn evaluate(a: &Geometry, b: &Geometry, c: &LowRankCoupling) -> Evaluation {
    let aq = a.apply(&c.q);
    let br = b.apply(&c.r);
    let qaq = c.q.t_matmul(&aq);
    let rbr = c.r.t_matmul(&br);
    let r = c.g.len();

    // exact marginals of the represented plan
    let q_cols = c.q.col_sums();
    let r_cols = c.r.col_sums();
    let row_mass = c.q.mul_vec(&(0..r).map(|k| r_cols[k] / c.g[k]).collect::<Vec<_>>());
    let col_mass = c.r.mul_vec(&(0..r).map(|k| q_cols[k] / c.g[k]).collect::<Vec<_>>());

    let mut cross = 0.0;
    for k in 0..r {
        for l in 0..r {
            cross += qaq[(k, l)] * rbr[(l, k)] / (c.g[k] * c.g[l]);
        }
    }
    let value = (a.squared_form(&row_mass) + b.squared_form(&col_mass) - 2.0 * cross).max(0.0);
    Evaluation {
        value,
        aq,
        br,
        qaq,
        rbr,
    }
}

/// Low-rank GW between two spaces with marginals `a` and `b`.
///
/// The reported value is the energy of the best iterate over all starts,
/// recomputed through the factors.
pub fn gw_lowrank(
    x: GwSpace<'_>,
    y: GwSpace<'_>,
    a: &ProbabilityVector,
    b: &ProbabilityVector,
    cfg: &LowRankGwConfig,
) -> Result<GwResult> {
    let ga = Geometry::from_space(x)?;
    let gb = Geometry::from_space(y)?;
    let (n, m) = (ga.len(), gb.len());
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "spaces have {n} and {m} points, marginals have {} and {}",
            a.len(),
            b.len()
        )));
    }
    let r = cfg.rank;
    if r < 2 || r > n.min(m) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} must lie in 2..={}",
            n.min(m)
        )));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", cfg.gamma)));
    }
    let (aw, bw) = (a.as_slice(), b.as_slice());

    // a start that collapses is dropped unless every start does
    let mut best: Option<GwResult> = None;
    let mut failure = None;
    let seeded = cfg.restarts.max(1);
    let starts = seeded + usize::from(cfg.eccentricity_start);
    for start in 0..starts {
        let init = if start < seeded {
            let seed = if start == 0 { cfg.seed } else { rng::derive_seed(cfg.seed, start as u64) };
            initial_coupling(aw, bw, seed, cfg)
        } else {
            eccentricity_coupling(&ga, &gb, aw, bw, cfg)
        };
        match init.and_then(|init| descend(&ga, &gb, aw, bw, init, cfg)) {
            Ok(run) => {
                if best.as_ref().map_or(true, |b| run.value < b.value) {
                    best = Some(run);
                }
            }
            Err(e) => failure = failure.or(Some(e)),
        }
    }
    match (best, failure) {
        (Some(run), _) => Ok(run),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start runs"),
    }
}

fn descend(
    ga: &Geometry,
    gb: &Geometry,
    aw: &[f64],
    bw: &[f64],
    mut current: LowRankCoupling,
    cfg: &LowRankGwConfig,
) -> Result<GwResult> {
    let mut eval = evaluate(ga, gb, &current);
    let mut best = (eval.value, current.clone());

    // Steps that lower the energy double the step size, rejected ones halve it.
    let mut gamma = cfg.gamma;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.outer_iter {
        iterations += 1;
        let next = match mirror_step(&current, &eval, aw, bw, cfg, gamma) {
            Ok(next) => Some(next),
            Err(Error::RankCollapse { .. }) => None,
            Err(e) => return Err(e),
        };
        let accepted = next.and_then(|next| {
            let next_eval = evaluate(ga, gb, &next);
            (next_eval.value <= eval.value).then_some((next, next_eval))
        });
        match accepted {
            Some((next, next_eval)) => {
                let delta = eval.value - next_eval.value;
                let reference = eval.value.max(1.0);
                current = next;
                eval = next_eval;
                if eval.value < best.0 {
                    best = (eval.value, current.clone());
                }
                gamma = (2.0 * gamma).min(MAX_STEP_GROWTH * cfg.gamma);
                if delta < cfg.tol * reference {
                    converged = true;
                    break;
                }
            }
            None => {
                gamma *= 0.5;
                if gamma < MIN_STEP_SHRINK * cfg.gamma {
                    converged = true;
                    break;
                }
            }
        }
    }

    Ok(GwResult {
        value: best.0,
        coupling: GwCoupling::LowRank(best.1),
        iterations,
        converged,
    })
}

/// Rank-r form of `a ⊗ b` (`g` uniform) with seeded multiplicative noise.
///
/// The noise stream for each factor depends only on the seed and that
/// factor's row count, so swapping the two spaces swaps the factors exactly.
fn initial_coupling(a: &[f64], b: &[f64], seed: u64, cfg: &LowRankGwConfig) -> Result<LowRankCoupling> {
    let r = cfg.rank;
    let g0 = 1.0 / r as f64;
    let noisy = |weights: &[f64]| {
        let mut rng = rng::rng(rng::derive_seed(seed, weights.len() as u64));
        Matrix::from_fn(weights.len(), r, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            weights[i] * g0 * math::exp(cfg.init_noise * z)
        })
    };
    let mut q = noisy(a);
    let mut rr = noisy(b);
    let mut g = vec![g0; r];
    project(&mut q, &mut rr, &mut g, a, b, cfg)?;
    Ok(LowRankCoupling { q, r: rr, g })
}

/// Share of the product coupling mixed into the eccentricity start, so no
/// entry starts at zero.
const ECCENTRICITY_MIX: f64 = 0.1;

/// Sorts each space by eccentricity `(A a)_i` and gives component `k` the
/// `k`-th mass quantile of both, mixed with a little of `a ⊗ b`.
fn eccentricity_coupling(
    ga: &Geometry,
    gb: &Geometry,
    a: &[f64],
    b: &[f64],
    cfg: &LowRankGwConfig,
) -> Result<LowRankCoupling> {
    let r = cfg.rank;
    let blocks = |geom: &Geometry, w: &[f64]| {
        let ecc = geom.apply(&Matrix::from_vec(w.len(), 1, w.to_vec()));
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&i, &j| ecc[(i, 0)].total_cmp(&ecc[(j, 0)]).then(i.cmp(&j)));
        let total: f64 = w.iter().sum();
        let mut f = Matrix::zeros(w.len(), r);
        let mut lo = 0.0;
        for &i in &order {
            let hi = lo + w[i] / total;
            for k in 0..r {
                let (s, e) = (k as f64 / r as f64, (k + 1) as f64 / r as f64);
                let overlap = hi.min(e) - lo.max(s);
                if overlap > 0.0 {
                    f[(i, k)] = overlap * total;
                }
            }
            lo = hi;
        }
        for i in 0..w.len() {
            for x in f.row_mut(i) {
                *x = (1.0 - ECCENTRICITY_MIX) * *x + ECCENTRICITY_MIX * w[i] / r as f64;
            }
        }
        f
    };
    let mut q = blocks(ga, a);
    let mut rr = blocks(gb, b);
    let mut g = vec![1.0 / r as f64; r];
    project(&mut q, &mut rr, &mut g, a, b, cfg)?;
    Ok(LowRankCoupling { q, r: rr, g })
}

fn mirror_step(
    c: &LowRankCoupling,
    eval: &Evaluation,
    a: &[f64],
    b: &[f64],
    cfg: &LowRankGwConfig,
    gamma: f64,
) -> Result<LowRankCoupling> {
    let r = c.g.len();
    let inv_g: Vec<f64> = c.g.iter().map(|g| 1.0 / g).collect();

    // D N D and D M D with D = diag(1/g)
    let scaled = |m: &Matrix| Matrix::from_fn(r, r, |k, l| inv_g[k] * m[(k, l)] * inv_g[l]);
    let mut grad_q = eval.aq.matmul(&scaled(&eval.rbr));
    grad_q.scale(-4.0);
    let mut grad_r = eval.br.matmul(&scaled(&eval.qaq));
    grad_r.scale(-4.0);
    let grad_g: Vec<f64> = (0..r)
        .map(|k| {
            let s: f64 = (0..r).map(|l| eval.qaq[(k, l)] * eval.rbr[(l, k)] * inv_g[l]).sum();
            4.0 * s * inv_g[k] * inv_g[k]
        })
        .collect();

    // Row-constant gradient components are absorbed by the projection, so
    // the step is normalized by the spread within each row.
    let (g_min, g_max) = grad_g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let spread = row_spread(&grad_q).max(row_spread(&grad_r)).max(g_max - g_min);
    if !spread.is_finite() {
        return Err(Error::InvalidParameter("non-finite gradient in low-rank GW".into()));
    }
    if spread <= 0.0 {
        return Ok(c.clone());
    }
    let step = gamma / spread;

    let update = |factor: &Matrix, grad: &Matrix| {
        let mut out = factor.clone();
        for i in 0..out.rows() {
            let gr = grad.row(i);
            let lo = gr.iter().copied().fold(f64::INFINITY, f64::min);
            for (x, &gv) in out.row_mut(i).iter_mut().zip(gr) {
                *x = (*x * math::exp(-step * (gv - lo))).max(ENTRY_FLOOR);
            }
        }
        out
    };
    let mut q = update(&c.q, &grad_q);
    let mut rr = update(&c.r, &grad_r);
    let mut g: Vec<f64> = c
        .g
        .iter()
        .zip(&grad_g)
        .map(|(g, gv)| (g * math::exp(-step * (gv - g_min))).max(ENTRY_FLOOR))
        .collect();
    project(&mut q, &mut rr, &mut g, a, b, cfg)?;
    Ok(LowRankCoupling { q, r: rr, g })
}

fn row_spread(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| {
            let (lo, hi) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// KL projection onto `{Q1 = a, R1 = b, Qᵀ1 = Rᵀ1 = g}` by alternating
/// projections onto `{Q1 = a, R1 = b}` and `{Qᵀ1 = g = Rᵀ1}`. The second
/// projection has the closed form `g = (g ⊙ Qᵀ1 ⊙ Rᵀ1)^{1/3}`.
///
/// The factors are then rounded onto `{Q1 = a, Qᵀ1 = g}` and
/// `{R1 = b, Rᵀ1 = g}`, so the constraints hold to rounding error even when
/// the alternating projections stop early.
fn project(
    q: &mut Matrix,
    r: &mut Matrix,
    g: &mut [f64],
    a: &[f64],
    b: &[f64],
    cfg: &LowRankGwConfig,
) -> Result<()> {
    let rank = g.len();
    for _ in 0..cfg.projection_max_iter.max(1) {
        scale_rows(q, a);
        scale_rows(r, b);
        let qc = q.col_sums();
        let rc = r.col_sums();
        for k in 0..rank {
            if !(qc[k] > 0.0 && rc[k] > 0.0) {
                return Err(Error::RankCollapse { index: k, value: g[k] });
            }
            g[k] = math::cbrt(g[k] * qc[k] * rc[k]);
        }
        for i in 0..q.rows() {
            for (k, x) in q.row_mut(i).iter_mut().enumerate() {
                *x *= g[k] / qc[k];
            }
        }
        for i in 0..r.rows() {
            for (k, x) in r.row_mut(i).iter_mut().enumerate() {
                *x *= g[k] / rc[k];
            }
        }
        let err = super::marginal_violation(&q.row_sums(), a)
            .max(super::marginal_violation(&r.row_sums(), b));
        if err < cfg.projection_tol {
            break;
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= total);
    if let Some((index, &value)) = g.iter().enumerate().find(|(_, &x)| !(x >= G_FLOOR)) {
        return Err(Error::RankCollapse { index, value });
    }
    round_onto(q, a, g);
    round_onto(r, b, g);
    Ok(())
}

/// Moves a nonnegative `m` onto `{M1 = rows, Mᵀ1 = cols}`: shrink rows and
/// columns that exceed their targets, then spread the remaining deficit as
/// a rank-one term. `rows` and `cols` must have equal totals.
fn round_onto(m: &mut Matrix, rows: &[f64], cols: &[f64]) {
    for (i, &t) in rows.iter().enumerate() {
        let row = m.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > t {
            let f = t / s;
            row.iter_mut().for_each(|x| *x *= f);
        }
    }
    let sums = m.col_sums();
    let shrink: Vec<f64> = sums
        .iter()
        .zip(cols)
        .map(|(&s, &t)| if s > t { t / s } else { 1.0 })
        .collect();
    for i in 0..m.rows() {
        for (x, f) in m.row_mut(i).iter_mut().zip(&shrink) {
            *x *= f;
        }
    }
    let row_gap: Vec<f64> = m.row_sums().iter().zip(rows).map(|(s, t)| (t - s).max(0.0)).collect();
    let col_gap: Vec<f64> = m.col_sums().iter().zip(cols).map(|(s, t)| (t - s).max(0.0)).collect();
    let mass: f64 = row_gap.iter().sum();
    if mass > 0.0 {
        for (i, &ri) in row_gap.iter().enumerate() {
            for (x, &ck) in m.row_mut(i).iter_mut().zip(&col_gap) {
                *x += ri * ck / mass;
            }
        }
    }
}

fn scale_rows(m: &mut Matrix, target: &[f64]) {
    for (i, &t) in target.iter().enumerate() {
        let row = m.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            let f = t / s;
            row.iter_mut().for_each(|x| *x *= f);
        }
    }
}
