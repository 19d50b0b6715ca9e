//! In-memory knowledge base of solved datasets. Persistence lives in the
//! `lotus` crate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::estimators::{PipelineSpec, TaskKind};
use crate::linalg::Matrix;
use crate::metrics::MetricValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub dataset_id: String,
    pub task: TaskKind,
    /// Cached embedding, n×k.
    pub embedding: Matrix,
    pub pipeline: PipelineSpec,
    pub score: MetricValue,
}

/// Entries keyed by `(task, dataset_id)`; inserting an existing key
/// replaces it. Iteration is in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    entries: BTreeMap<(TaskKind, String), StoreEntry>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn upsert(&mut self, entry: StoreEntry) {
        self.entries.insert((entry.task, entry.dataset_id.clone()), entry);
    }

    pub fn remove(&mut self, task: TaskKind, id: &str) -> Option<StoreEntry> {
        self.entries.remove(&(task, String::from(id)))
    }

    pub fn get(&self, task: TaskKind, id: &str) -> Option<&StoreEntry> {
        self.entries.get(&(task, String::from(id)))
    }

    pub fn for_task(&self, task: TaskKind) -> Vec<&StoreEntry> {
        self.entries.values().filter(|e| e.task == task).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoreEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<StoreEntry> for MemoryStore {
    fn from_iter<I: IntoIterator<Item = StoreEntry>>(iter: I) -> Self {
        let mut s = MemoryStore::new();
        for e in iter {
            s.upsert(e);
        }
        s
    }
}
