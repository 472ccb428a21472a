//! Retraining policy and targeted-edge selection.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageBitmap;

/// When to (re)train the coverage model.
///
/// The first training only needs `min_corpus` test cases; after that a
/// retraining additionally requires `min_new_testcases` corpus additions and
/// `min_interval` elapsed virtual-time units since the last one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrainPolicy {
    pub min_corpus: usize,
    pub min_new_testcases: usize,
    /// Virtual-time units; the desk-scale analog of "at most every hour".
    pub min_interval: u64,
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        Self {
            min_corpus: 200,
            min_new_testcases: 10,
            min_interval: 3600,
        }
    }
}

/// Trial-side counters the policy is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrainState {
    pub corpus_size: usize,
    /// Corpus entries added since the last training.
    pub new_since_last: usize,
    /// Virtual time elapsed since the last training.
    pub elapsed_since_last: u64,
    pub trained_before: bool,
}

pub fn should_retrain(policy: &RetrainPolicy, state: &RetrainState) -> bool {
    if state.corpus_size < policy.min_corpus {
        return false;
    }
    if !state.trained_before {
        return true;
    }
    state.new_since_last >= policy.min_new_testcases
        && state.elapsed_since_last >= policy.min_interval
}

/// Sample `count` distinct reduced-bitmap columns, weighted toward rare ones
/// (weight = 1 / column coverage frequency). When `count` covers all
/// columns the result is a weighted-order permutation.
pub fn select_target_edges(
    bitmap: &CoverageBitmap,
    count: usize,
    rng: &mut dyn RngCore,
) -> Vec<usize> {
    let mut remaining: Vec<(usize, f64)> = (0..bitmap.num_columns())
        .map(|c| (c, 1.0 / bitmap.column_frequency(c)))
        .collect();
    let mut picked = Vec::with_capacity(count.min(remaining.len()));
    while picked.len() < count && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&(_, w)| w).sum();
        let mut roll = rng.gen::<f64>() * total;
        let mut chosen = remaining.len() - 1;
        for (i, &(_, w)) in remaining.iter().enumerate() {
            roll -= w;
            if roll < 0.0 {
                chosen = i;
                break;
            }
        }
        picked.push(remaining.swap_remove(chosen).0);
    }
    picked
}
