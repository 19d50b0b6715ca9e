//! Dataset distance (subsample, FastICA embedding, low-rank GW) and
//! nearest-dataset retrieval over a store.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{subsample, NumericMatrix};
use crate::error::{Error, Result};
use crate::estimators::{PipelineSpec, TaskKind};
use crate::ica::{default_components, fit_ica, IcaConfig};
use crate::linalg::Matrix;
use crate::ot::{gw_lowrank, GwResult, GwSpace, LowRankGwConfig, ProbabilityVector};
use crate::rng::derive_seed_str;
use crate::runtime::{timed, Clock, Env, Executor};
use crate::store::MemoryStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub subsample_cap: usize,
    /// ICA components; `None` means `min(d, 20)`. Always capped at `d` and
    /// at the rank of the sample covariance.
    pub ica_k: Option<usize>,
    pub ica_max_iter: usize,
    /// `gw.seed` is ignored: each pair gets its own seed. `gw.rank` is
    /// capped at the smaller point count. The default runs one seeded
    /// start plus the eccentricity start.
    pub gw: LowRankGwConfig,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            subsample_cap: 1000,
            ica_k: None,
            ica_max_iter: 200,
            gw: LowRankGwConfig {
                restarts: 1,
                ..LowRankGwConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub candidate_id: String,
    pub value: f64,
    /// Seconds.
    pub wall_time: f64,
    pub solver_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub pipeline: PipelineSpec,
    pub source_dataset: String,
    pub distance: f64,
    pub candidates: Vec<DistanceRecord>,
}

/// Subsamples to the cap and maps rows onto the ICA components. The seed
/// does not involve the dataset id, so identical data embeds identically.
pub fn embed(m: &NumericMatrix, cfg: &SimilarityConfig, seed: u64) -> Result<Matrix> {
    let id = m.source_id();
    let rows = subsample(m, cfg.subsample_cap, derive_seed_str(seed, "subsample"));
    let k = cfg.ica_k.unwrap_or_else(|| default_components(m.d())).min(m.d());
    let ica = IcaConfig {
        max_iter: cfg.ica_max_iter,
        ..IcaConfig::new(k, derive_seed_str(seed, "ica"))
    };
    let model = match fit_ica(&rows, &ica) {
        // one-hot blocks and duplicated columns lose rank; keep what is there
        Err(Error::RankDeficient { rank, .. }) if rank >= 1 => fit_ica(
            &rows,
            &IcaConfig {
                components: rank,
                ..ica
            },
        ),
        other => other,
    }
    .map_err(|e| e.in_dataset(id))?;
    Ok(model.transform(&rows).map_err(|e| e.in_dataset(id))?.into_data())
}

/// Low-rank GW between two embeddings under uniform weights.
pub fn embedding_distance(ea: &Matrix, eb: &Matrix, cfg: &SimilarityConfig, seed: u64) -> Result<GwResult> {
    let (n, m) = (ea.rows(), eb.rows());
    let gw = LowRankGwConfig {
        rank: cfg.gw.rank.min(n).min(m),
        seed,
        ..cfg.gw
    };
    gw_lowrank(
        GwSpace::Points(ea),
        GwSpace::Points(eb),
        &ProbabilityVector::uniform(n),
        &ProbabilityVector::uniform(m),
        &gw,
    )
}

pub fn dataset_distance(
    da: &NumericMatrix,
    db: &NumericMatrix,
    cfg: &SimilarityConfig,
    seed: u64,
    clock: &dyn Clock,
) -> Result<DistanceRecord> {
    let (out, wall_time) = timed(clock, || -> Result<GwResult> {
        let ea = embed(da, cfg, seed)?;
        let eb = embed(db, cfg, seed)?;
        embedding_distance(&ea, &eb, cfg, seed).map_err(|e| e.in_dataset(db.source_id()))
    });
    let out = out?;
    Ok(DistanceRecord {
        candidate_id: db.source_id().into(),
        value: out.value,
        wall_time,
        solver_converged: out.converged,
    })
}

/// Distances from `dnew` to every stored dataset of `task`, ascending by
/// value with ties broken by id.
pub fn rank_candidates<E: Executor>(
    dnew: &NumericMatrix,
    store: &MemoryStore,
    task: TaskKind,
    cfg: &SimilarityConfig,
    seed: u64,
    env: Env<'_, E>,
) -> Result<Vec<DistanceRecord>> {
    let entries = store.for_task(task);
    if entries.is_empty() {
        return Err(Error::EmptyStore(task.as_str().into()));
    }
    let query = embed(dnew, cfg, seed)?;
    let results = env.exec.map(entries, |entry| {
        let id = &entry.dataset_id;
        let (out, wall_time) = timed(env.clock, || {
            embedding_distance(&query, &entry.embedding, cfg, derive_seed_str(seed, id))
        });
        out.map(|r| DistanceRecord {
            candidate_id: id.clone(),
            value: r.value,
            wall_time,
            solver_converged: r.converged,
        })
        .map_err(|e| e.in_dataset(id))
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.candidate_id.cmp(&b.candidate_id)));
    Ok(records)
}

/// The stored pipeline of the nearest dataset.
pub fn recommend<E: Executor>(
    dnew: &NumericMatrix,
    store: &MemoryStore,
    task: TaskKind,
    cfg: &SimilarityConfig,
    seed: u64,
    env: Env<'_, E>,
) -> Result<Recommendation> {
    let candidates = rank_candidates(dnew, store, task, cfg, seed, env)?;
    let top = &candidates[0];
    let entry = store
        .get(task, &top.candidate_id)
        .expect("ranked ids come from the store");
    Ok(Recommendation {
        pipeline: entry.pipeline.clone(),
        source_dataset: top.candidate_id.clone(),
        distance: top.value,
        candidates,
    })
}
