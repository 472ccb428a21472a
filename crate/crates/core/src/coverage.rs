//! Corpus-level coverage bitmaps and the replay metric.
//!
//! A [`CoverageBitmap`] is the training data for the coverage model: one row
//! per test case, one column per edge that was hit by at least one test case.
//! Edges never reached by the corpus have no column at all, so nothing
//! downstream can name an uncovered edge. [`reduce`] losslessly merges
//! duplicate columns; [`replay_coverage`] is the single comparison metric
//! used across fuzzer configurations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::target::{execute, EdgeId, Target};

/// Identifier of a test case within one trial's corpus.
pub type TestId = u64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("cannot build a coverage bitmap from an empty corpus")]
    EmptyCorpus,
}

/// Test-case x edge binary coverage matrix.
///
/// Rows align with `corpus_ids`; each column carries the set of original
/// edge ids it represents (a singleton before reduction, possibly several
/// after). Columns are ordered by their smallest edge id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageBitmap {
    rows: Vec<Vec<bool>>,
    edge_index: Vec<BTreeSet<EdgeId>>,
    corpus_ids: Vec<TestId>,
}

impl CoverageBitmap {
    /// Build a bitmap directly from per-test-case edge sets. Columns are the
    /// sorted union of all edges, one per edge.
    pub fn from_edge_sets(entries: &[(TestId, BTreeSet<EdgeId>)]) -> Result<Self, CoverageError> {
        if entries.is_empty() {
            return Err(CoverageError::EmptyCorpus);
        }
        let mut all_edges: BTreeSet<EdgeId> = BTreeSet::new();
        for (_, edges) in entries {
            all_edges.extend(edges.iter().copied());
        }
        let columns: Vec<EdgeId> = all_edges.iter().copied().collect();
        let rows = entries
            .iter()
            .map(|(_, edges)| columns.iter().map(|e| edges.contains(e)).collect())
            .collect();
        Ok(Self {
            rows,
            edge_index: columns.into_iter().map(|e| BTreeSet::from([e])).collect(),
            corpus_ids: entries.iter().map(|(id, _)| *id).collect(),
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.edge_index.len()
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn corpus_ids(&self) -> &[TestId] {
        &self.corpus_ids
    }

    /// Original edge ids represented by column `c`.
    pub fn column_edges(&self, c: usize) -> &BTreeSet<EdgeId> {
        &self.edge_index[c]
    }

    pub fn edge_index(&self) -> &[BTreeSet<EdgeId>] {
        &self.edge_index
    }

    /// Fraction of rows covering column `c`. Strictly positive by
    /// construction: a column only exists because some test case hit it.
    pub fn column_frequency(&self, c: usize) -> f64 {
        let ones = self.rows.iter().filter(|r| r[c]).count();
        ones as f64 / self.rows.len() as f64
    }

    /// Union of all edges represented by the bitmap's columns.
    pub fn covered_edges(&self) -> BTreeSet<EdgeId> {
        self.edge_index.iter().flatten().copied().collect()
    }
}

/// Memoized test-case coverage, confined to one trial. A cache hit returns
/// exactly what `execute` would; misses execute and are counted.
#[derive(Debug, Default, Clone)]
pub struct CoverageCache {
    entries: BTreeMap<TestId, BTreeSet<EdgeId>>,
    executions: u64,
}

impl CoverageCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of target executions this cache has performed on misses.
    pub fn executions(&self) -> u64 {
        self.executions
    }

    /// Record a known result, e.g. from the engine's own execution.
    pub fn insert(&mut self, id: TestId, edges: BTreeSet<EdgeId>) {
        self.entries.insert(id, edges);
    }

    fn edges_for(&mut self, id: TestId, input: &[u8], target: &dyn Target) -> BTreeSet<EdgeId> {
        if let Some(edges) = self.entries.get(&id) {
            return edges.clone();
        }
        self.executions += 1;
        let edges = execute(target, input).edges_hit;
        self.entries.insert(id, edges.clone());
        edges
    }
}

/// Execute every (uncached) corpus entry and assemble the coverage bitmap.
///
/// One row per test case; columns are the union of edges hit by any test
/// case, each a singleton. Previously seen ids are served from `cache`.
pub fn aggregate(
    corpus: &[(TestId, &[u8])],
    target: &dyn Target,
    cache: &mut CoverageCache,
) -> Result<CoverageBitmap, CoverageError> {
    if corpus.is_empty() {
        return Err(CoverageError::EmptyCorpus);
    }
    let entries: Vec<(TestId, BTreeSet<EdgeId>)> = corpus
        .iter()
        .map(|&(id, input)| (id, cache.edges_for(id, input, target)))
        .collect();
    CoverageBitmap::from_edge_sets(&entries)
}

/// Merge columns with identical 0/1 patterns across all rows. The merged
/// column's edge set is the union; row count is unchanged; [`expand`]
/// reproduces the input exactly. Columns stay ordered by smallest edge id.
pub fn reduce(bitmap: &CoverageBitmap) -> CoverageBitmap {
    let mut groups: BTreeMap<Vec<bool>, BTreeSet<EdgeId>> = BTreeMap::new();
    for c in 0..bitmap.num_columns() {
        let pattern: Vec<bool> = bitmap.rows.iter().map(|r| r[c]).collect();
        groups
            .entry(pattern)
            .or_default()
            .extend(bitmap.edge_index[c].iter().copied());
    }
    let mut merged: Vec<(Vec<bool>, BTreeSet<EdgeId>)> = groups.into_iter().collect();
    merged.sort_by_key(|(_, edges)| *edges.iter().next().expect("column has an edge"));

    let rows = (0..bitmap.num_rows())
        .map(|r| merged.iter().map(|(pattern, _)| pattern[r]).collect())
        .collect();
    CoverageBitmap {
        rows,
        edge_index: merged.into_iter().map(|(_, edges)| edges).collect(),
        corpus_ids: bitmap.corpus_ids.clone(),
    }
}

/// Undo [`reduce`]: one column per original edge id, sorted ascending, each
/// repeating its merged column's pattern.
pub fn expand(bitmap: &CoverageBitmap) -> CoverageBitmap {
    let mut columns: Vec<(EdgeId, usize)> = Vec::new();
    for (c, edges) in bitmap.edge_index.iter().enumerate() {
        for &e in edges {
            columns.push((e, c));
        }
    }
    columns.sort_unstable();
    let rows = bitmap
        .rows
        .iter()
        .map(|row| columns.iter().map(|&(_, c)| row[c]).collect())
        .collect();
    CoverageBitmap {
        rows,
        edge_index: columns
            .into_iter()
            .map(|(e, _)| BTreeSet::from([e]))
            .collect(),
        corpus_ids: bitmap.corpus_ids.clone(),
    }
}

/// Replay a corpus and return the union of hit edges with its size. This is
/// the single comparison metric across fuzzer configurations.
pub fn replay_coverage<'a, I>(corpus: I, target: &dyn Target) -> (BTreeSet<EdgeId>, usize)
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut edges = BTreeSet::new();
    for input in corpus {
        edges.extend(execute(target, input).edges_hit);
    }
    let count = edges.len();
    (edges, count)
}

/// Fraction of (test case, edge) cells that are covered. Applied to the
/// unreduced bitmap this is the positive-class rate of the training data.
pub fn imbalance(bitmap: &CoverageBitmap) -> f64 {
    let cells = bitmap.num_rows() * bitmap.num_columns();
    if cells == 0 {
        return 0.0;
    }
    let ones: usize = bitmap.rows.iter().map(|r| r.iter().filter(|&&b| b).count()).sum();
    ones as f64 / cells as f64
}
