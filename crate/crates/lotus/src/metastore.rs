//! The persistent knowledge base: a JSON-lines log of entries plus one
//! embedding CSV per dataset under `embeddings/` next to the log.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use lotus_core::estimators::{PipelineSpec, TaskKind};
use lotus_core::metrics::{MetricName, MetricValue};
use lotus_core::store::{MemoryStore, StoreEntry};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::io::{read_matrix, write_matrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEntry {
    pub dataset_id: String,
    pub task: TaskKind,
    /// Relative to the directory holding the log.
    pub embedding_path: String,
    pub pipeline: PipelineSpec,
    pub score: MetricValue,
    pub metric_name: MetricName,
    pub created_at: String,
    pub toolkit_version: String,
}

impl MetaEntry {
    /// Equal apart from when and by which version it was written.
    fn same_content(&self, other: &MetaEntry) -> bool {
        self.dataset_id == other.dataset_id
            && self.task == other.task
            && self.embedding_path == other.embedding_path
            && self.pipeline == other.pipeline
            && self.score == other.score
            && self.metric_name == other.metric_name
    }
}

#[derive(Debug, Clone)]
pub struct MetaStore {
    path: PathBuf,
    root: PathBuf,
    /// Latest entry per `(task, dataset_id)`.
    entries: BTreeMap<(TaskKind, String), MetaEntry>,
    warnings: Vec<String>,
}

/// `RFC 3339` time of writing. `SOURCE_DATE_EPOCH` pins it for
/// reproducible stores.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\'])
}

impl MetaStore {
    /// Loads the log at `path`; a missing file is an empty store. Lines that
    /// do not parse, or whose embedding is missing, are skipped with a
    /// warning naming the line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut store = MetaStore {
            path: path.clone(),
            root,
            entries: BTreeMap::new(),
            warnings: Vec::new(),
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(io_err(&path)(e)),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<MetaEntry>(line) {
                Ok(e) if !valid_id(&e.dataset_id) => store
                    .warnings
                    .push(format!("line {}: invalid dataset id {:?}", i + 1, e.dataset_id)),
                Ok(e) => {
                    store.entries.insert((e.task, e.dataset_id.clone()), e);
                }
                Err(err) => store.warnings.push(format!("line {}: {err}", i + 1)),
            }
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn entries(&self) -> impl Iterator<Item = &MetaEntry> {
        self.entries.values()
    }

    pub fn get(&self, task: TaskKind, id: &str) -> Option<&MetaEntry> {
        self.entries.get(&(task, id.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn embedding_file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `embeddings/<id>.csv` and returns its relative path.
    pub fn write_embedding(&self, id: &str, m: &lotus_core::Matrix) -> Result<String> {
        if !valid_id(id) {
            return Err(Error::Format {
                path: self.path.clone(),
                message: format!("dataset id {id:?} cannot name a file"),
            });
        }
        let dir = self.root.join("embeddings");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let rel = format!("embeddings/{id}.csv");
        write_matrix(&self.root.join(&rel), m, None)?;
        Ok(rel)
    }

    /// Appends `entry` to the log. The embedding file must already exist and
    /// parse; otherwise nothing is written.
    pub fn append(&mut self, entry: MetaEntry) -> Result<()> {
        if !valid_id(&entry.dataset_id) {
            return Err(Error::Format {
                path: self.path.clone(),
                message: format!("dataset id {:?} cannot name a file", entry.dataset_id),
            });
        }
        read_matrix(&self.embedding_file(&entry.embedding_path))?;
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err(&self.path))?;
        f.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        f.sync_data().map_err(io_err(&self.path))?;
        self.entries.insert((entry.task, entry.dataset_id.clone()), entry);
        Ok(())
    }

    /// Persists a trained entry. Returns `false` without touching the log
    /// when the current entry for that id already has the same content.
    pub fn record(&mut self, e: &StoreEntry) -> Result<bool> {
        let embedding_path = self.write_embedding(&e.dataset_id, &e.embedding)?;
        let entry = MetaEntry {
            dataset_id: e.dataset_id.clone(),
            task: e.task,
            embedding_path,
            pipeline: e.pipeline.clone(),
            score: e.score,
            metric_name: e.score.name,
            created_at: timestamp(),
            toolkit_version: VERSION.into(),
        };
        if self.get(e.task, &e.dataset_id).is_some_and(|old| old.same_content(&entry)) {
            return Ok(false);
        }
        self.append(entry)?;
        Ok(true)
    }

    /// Loads every embedding into an in-memory store.
    pub fn to_memory(&self) -> Result<MemoryStore> {
        self.entries()
            .map(|e| {
                Ok(StoreEntry {
                    dataset_id: e.dataset_id.clone(),
                    task: e.task,
                    embedding: read_matrix(&self.embedding_file(&e.embedding_path))?,
                    pipeline: e.pipeline.clone(),
                    score: e.score,
                })
            })
            .collect()
    }
}
