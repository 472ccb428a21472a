//! The coverage-guided evolutionary loop.
//!
//! One trial is strictly single-threaded and a pure function of (target,
//! seeds, config): scheduling is a FIFO cycle with a one-round boost for
//! the most recent coverage finders, candidates come from havoc chains
//! and/or gradient-guided mutation batches, and anything that reaches a new
//! edge joins the corpus with full provenance. Virtual time advances by
//! execution cost (plus configured transmission overhead) per run and by a
//! configured training cost per model (re)training.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::apply_overhead;
use crate::coverage::{aggregate, reduce, CoverageBitmap, CoverageCache, TestId};
use crate::mleval::MacroMetrics;
use crate::smoothing::{
    plan_mutations, select_target_edges, should_retrain, CoverageModel, ModelCheckpoint,
    PatternConfig, RetrainPolicy, RetrainState, TrainConfig,
};
use crate::target::{execute, CrashSignature, EdgeId, Target};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("a trial needs at least one initial seed")]
    NoSeeds,
    #[error("initial seeds must be non-empty byte sequences")]
    EmptySeed,
    #[error("invalid fuzz configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("reports come from different targets: {a} vs {b}")]
    TargetMismatch { a: String, b: String },
    #[error("training failed: {0}")]
    Train(#[from] crate::smoothing::SmoothingError),
}

/// How a corpus entry was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Seed,
    Havoc,
    Ml,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Seed => "seed",
            Source::Havoc => "havoc",
            Source::Ml => "ml",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: TestId,
    pub input: Vec<u8>,
    pub edges_hit: BTreeSet<EdgeId>,
    pub source: Source,
    /// Present for every non-seed entry.
    pub parent: Option<TestId>,
    /// Virtual time at insertion.
    pub discovered_at: u64,
    /// Edges this entry added to global coverage when it was inserted.
    pub new_edges_at_insertion: usize,
}

/// Mutator mix of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutatorMix {
    /// Havoc rounds only.
    Havoc,
    /// Gradient-guided batches once a model exists; havoc bootstraps the
    /// corpus until the first training.
    Nps,
    /// Gradient-guided rounds interleaved with havoc rounds.
    NpsHavoc,
}

impl MutatorMix {
    pub fn uses_ml(&self) -> bool {
        !matches!(self, MutatorMix::Havoc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MutatorMix::Havoc => "havoc",
            MutatorMix::Nps => "nps",
            MutatorMix::NpsHavoc => "nps_havoc",
        }
    }
}

impl core::fmt::Display for MutatorMix {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Havoc chain bounds and chunk sizing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HavocConfig {
    pub chain_min: usize,
    pub chain_max: usize,
    pub chunk_max: usize,
}

impl Default for HavocConfig {
    fn default() -> Self {
        Self {
            chain_min: 1,
            chain_max: 16,
            chunk_max: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzConfig {
    pub rng_seed: u64,
    /// Virtual-time budget. Seeds are executed even when it is 0.
    pub budget: u64,
    pub mix: MutatorMix,
    pub havoc: HavocConfig,
    pub retrain: RetrainPolicy,
    pub train: TrainConfig,
    /// Maximum mutation-guiding gradients per seed (hot-byte cap).
    pub gradient_cap: usize,
    /// Chunk cap for the gradient-mutation insert/delete patterns.
    pub chunk_max: usize,
    /// In `nps_havoc` mode, one ML round per this many rounds.
    pub ml_round_period: usize,
    /// Bitmap columns targeted per ML round.
    pub edges_per_ml_round: usize,
    /// Havoc candidates generated per havoc round.
    pub candidates_per_round: usize,
    /// Extra virtual time charged per execution (test-case transmission).
    pub overhead_per_exec: u64,
    /// Virtual time charged per model (re)training.
    pub train_cost: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            budget: 10_000,
            mix: MutatorMix::NpsHavoc,
            havoc: HavocConfig::default(),
            retrain: RetrainPolicy::default(),
            train: TrainConfig::default(),
            gradient_cap: 500,
            chunk_max: 32,
            ml_round_period: 5,
            edges_per_ml_round: 2,
            candidates_per_round: 16,
            overhead_per_exec: 0,
            train_cost: 500,
        }
    }
}

/// One model (re)training event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrainRecord {
    pub time: u64,
    pub corpus_size: usize,
    /// Columns of the reduced training bitmap.
    pub bitmap_columns: usize,
    /// Edges covered by the training corpus; the only edges the model can
    /// address.
    pub covered_edges: BTreeSet<EdgeId>,
    pub final_train_loss: f64,
    pub holdout_metrics: MacroMetrics,
}

/// One gradient-guided mutation batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlBatchRecord {
    pub time: u64,
    /// Index into the trial's `model_history`.
    pub training_index: usize,
    pub targeted_columns: Vec<usize>,
    /// Original edge ids behind the targeted columns.
    pub targeted_edges: BTreeSet<EdgeId>,
    pub bitmap_columns: usize,
    pub candidates: usize,
    pub accepted: usize,
}

/// Replay coverage restricted to each corpus source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCoverage {
    pub seed: usize,
    pub havoc: usize,
    pub ml: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub target: String,
    pub config: FuzzConfig,
    /// (virtual time, total replay edge count), non-decreasing.
    pub coverage_series: Vec<(u64, usize)>,
    pub corpus: Vec<CorpusEntry>,
    /// Unique crash signatures in discovery order.
    pub crashes: Vec<CrashSignature>,
    /// Union of edges over the final corpus.
    pub replay_edges: BTreeSet<EdgeId>,
    pub final_coverage: usize,
    pub source_coverage: SourceCoverage,
    pub ml_stats: MlSeedStats,
    pub executions: u64,
    /// Virtual time consumed.
    pub elapsed: u64,
    pub model_history: Vec<ModelTrainRecord>,
    pub ml_batches: Vec<MlBatchRecord>,
    pub final_model: Option<ModelCheckpoint>,
}

/// True iff the result reaches at least one edge outside the global set.
pub fn is_interesting(result_edges: &BTreeSet<EdgeId>, global: &BTreeSet<EdgeId>) -> bool {
    result_edges.iter().any(|e| !global.contains(e))
}

/// Record a crash signature; true iff this exact frame list is new.
pub fn dedup_crash(signature: &CrashSignature, seen: &mut BTreeSet<CrashSignature>) -> bool {
    seen.insert(signature.clone())
}

/// Apply a uniformly drawn chain of atomic mutations: bit flip, random byte
/// set, wrapping byte increment/decrement, chunk duplicate, chunk delete,
/// chunk insert. Output length stays in `[1, max_input_len]`.
pub fn havoc(
    input: &[u8],
    rng: &mut dyn RngCore,
    config: &HavocConfig,
    max_input_len: usize,
) -> Vec<u8> {
    assert!(!input.is_empty(), "havoc inputs are never empty");
    let mut buf = input.to_vec();
    let chain = rng.gen_range(config.chain_min..=config.chain_max);
    for _ in 0..chain {
        let len = buf.len();
        match rng.gen_range(0..7u32) {
            0 => {
                let offset = rng.gen_range(0..len);
                let bit = rng.gen_range(0..8u32);
                buf[offset] ^= 1 << bit;
            }
            1 => {
                let offset = rng.gen_range(0..len);
                buf[offset] = rng.gen();
            }
            2 => {
                let offset = rng.gen_range(0..len);
                buf[offset] = buf[offset].wrapping_add(1);
            }
            3 => {
                let offset = rng.gen_range(0..len);
                buf[offset] = buf[offset].wrapping_sub(1);
            }
            4 => {
                let src = rng.gen_range(0..len);
                let copy_len = rng.gen_range(1..=config.chunk_max.min(len - src));
                let chunk: Vec<u8> = buf[src..src + copy_len].to_vec();
                let at = rng.gen_range(0..=len);
                buf.splice(at..at, chunk);
                buf.truncate(max_input_len);
            }
            5 => {
                let offset = rng.gen_range(0..len);
                let del = rng.gen_range(1..=config.chunk_max.min(len - offset));
                if del < len {
                    buf.drain(offset..offset + del);
                }
            }
            6 => {
                let at = rng.gen_range(0..=len);
                let ins = rng.gen_range(1..=config.chunk_max);
                let chunk: Vec<u8> = (0..ins).map(|_| rng.gen()).collect();
                buf.splice(at..at, chunk);
                buf.truncate(max_input_len);
            }
            _ => unreachable!(),
        }
    }
    buf.truncate(max_input_len);
    debug_assert!(!buf.is_empty());
    buf
}

struct ModelState {
    model: CoverageModel,
    bitmap: CoverageBitmap,
    covered: BTreeSet<EdgeId>,
}

struct TrialState {
    rng: ChaCha8Rng,
    clock: u64,
    executions: u64,
    corpus: Vec<CorpusEntry>,
    global: BTreeSet<EdgeId>,
    seen_crashes: BTreeSet<CrashSignature>,
    crashes: Vec<CrashSignature>,
    series: Vec<(u64, usize)>,
    cache: CoverageCache,
    boost: VecDeque<usize>,
    model: Option<ModelState>,
    model_history: Vec<ModelTrainRecord>,
    ml_batches: Vec<MlBatchRecord>,
    last_train_time: u64,
    new_since_last: usize,
}

/// Execute a candidate, account for it, and insert it into the corpus when
/// it reaches new coverage. Returns true on insertion.
fn consider(
    state: &mut TrialState,
    target: &dyn Target,
    config: &FuzzConfig,
    input: Vec<u8>,
    source: Source,
    parent: Option<TestId>,
) -> bool {
    let result = execute(target, &input);
    state.clock += apply_overhead(result.exec_cost, config.overhead_per_exec);
    state.executions += 1;

    if let Some(signature) = &result.crash {
        if dedup_crash(signature, &mut state.seen_crashes) {
            state.crashes.push(signature.clone());
        }
    }

    // New coverage is judged against the global set before the merge.
    if !is_interesting(&result.edges_hit, &state.global) {
        return false;
    }
    let new_edges = result
        .edges_hit
        .iter()
        .filter(|e| !state.global.contains(e))
        .count();
    let id = state.corpus.len() as TestId;
    state.cache.insert(id, result.edges_hit.clone());
    state.global.extend(result.edges_hit.iter().copied());
    state.corpus.push(CorpusEntry {
        id,
        input,
        edges_hit: result.edges_hit,
        source,
        parent,
        discovered_at: state.clock,
        new_edges_at_insertion: new_edges,
    });
    state.boost.push_back(state.corpus.len() - 1);
    state.new_since_last += 1;
    state.series.push((state.clock, state.global.len()));
    true
}

/// Seeds always join the corpus, interesting or not.
fn insert_seed(state: &mut TrialState, target: &dyn Target, config: &FuzzConfig, input: Vec<u8>) {
    let result = execute(target, &input);
    state.clock += apply_overhead(result.exec_cost, config.overhead_per_exec);
    state.executions += 1;
    if let Some(signature) = &result.crash {
        if dedup_crash(signature, &mut state.seen_crashes) {
            state.crashes.push(signature.clone());
        }
    }
    let new_edges = result
        .edges_hit
        .iter()
        .filter(|e| !state.global.contains(e))
        .count();
    let id = state.corpus.len() as TestId;
    state.cache.insert(id, result.edges_hit.clone());
    state.global.extend(result.edges_hit.iter().copied());
    state.corpus.push(CorpusEntry {
        id,
        input,
        edges_hit: result.edges_hit,
        source: Source::Seed,
        parent: None,
        discovered_at: state.clock,
        new_edges_at_insertion: new_edges,
    });
    state.new_since_last += 1;
    if new_edges > 0 {
        state.series.push((state.clock, state.global.len()));
    }
}

fn retrain(
    state: &mut TrialState,
    target: &dyn Target,
    config: &FuzzConfig,
) -> Result<(), EngineError> {
    let pairs: Vec<(TestId, &[u8])> = state
        .corpus
        .iter()
        .map(|e| (e.id, e.input.as_slice()))
        .collect();
    let bitmap = aggregate(&pairs, target, &mut state.cache).expect("corpus is non-empty");
    let reduced = reduce(&bitmap);
    let inputs: Vec<&[u8]> = state.corpus.iter().map(|e| e.input.as_slice()).collect();
    let mut train_config = config.train.clone();
    train_config.seed = state.rng.next_u64();
    let outcome = crate::smoothing::train(&reduced, &inputs, &train_config)?;

    state.clock += config.train_cost;
    state.last_train_time = state.clock;
    state.new_since_last = 0;
    state.model_history.push(ModelTrainRecord {
        time: state.clock,
        corpus_size: state.corpus.len(),
        bitmap_columns: reduced.num_columns(),
        covered_edges: reduced.covered_edges(),
        final_train_loss: *outcome.train_loss.last().expect("at least one epoch"),
        holdout_metrics: outcome.holdout_metrics.macro_avg,
    });
    let covered = reduced.covered_edges();
    state.model = Some(ModelState {
        model: outcome.model,
        bitmap: reduced,
        covered,
    });
    Ok(())
}

fn validate_config(config: &FuzzConfig) -> Result<(), EngineError> {
    if config.havoc.chain_min == 0 || config.havoc.chain_min > config.havoc.chain_max {
        return Err(EngineError::InvalidConfig("havoc chain bounds"));
    }
    if config.havoc.chunk_max == 0 || config.chunk_max == 0 {
        return Err(EngineError::InvalidConfig("chunk_max must be positive"));
    }
    if config.ml_round_period == 0
        || config.edges_per_ml_round == 0
        || config.candidates_per_round == 0
        || config.gradient_cap == 0
    {
        return Err(EngineError::InvalidConfig("round parameters must be positive"));
    }
    Ok(())
}

/// Run one deterministic fuzzing trial.
pub fn run_trial(
    target: &dyn Target,
    seeds: &[Vec<u8>],
    config: &FuzzConfig,
) -> Result<TrialReport, EngineError> {
    if seeds.is_empty() {
        return Err(EngineError::NoSeeds);
    }
    if seeds.iter().any(|s| s.is_empty()) {
        return Err(EngineError::EmptySeed);
    }
    validate_config(config)?;

    let spec = target.spec().clone();
    let mut state = TrialState {
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        clock: 0,
        executions: 0,
        corpus: Vec::new(),
        global: BTreeSet::new(),
        seen_crashes: BTreeSet::new(),
        crashes: Vec::new(),
        series: Vec::new(),
        cache: CoverageCache::new(),
        boost: VecDeque::new(),
        model: None,
        model_history: Vec::new(),
        ml_batches: Vec::new(),
        last_train_time: 0,
        new_since_last: 0,
    };

    for seed in seeds {
        let mut input = seed.clone();
        input.truncate(spec.max_input_len);
        insert_seed(&mut state, target, config, input);
    }

    let pattern = PatternConfig {
        chunk_max: config.chunk_max,
        ..PatternConfig::new(spec.max_input_len)
    };
    let mut round = 0usize;
    let mut queue_pos = 0usize;

    while state.clock < config.budget {
        // Retraining gate. Training itself needs at least two test cases
        // for a holdout split.
        if config.mix.uses_ml()
            && state.corpus.len() >= 2
            && should_retrain(
                &config.retrain,
                &RetrainState {
                    corpus_size: state.corpus.len(),
                    new_since_last: state.new_since_last,
                    elapsed_since_last: state.clock - state.last_train_time,
                    trained_before: !state.model_history.is_empty(),
                },
            )
        {
            retrain(&mut state, target, config)?;
            continue;
        }

        let entry_idx = match state.boost.pop_front() {
            Some(idx) => idx,
            None => {
                let idx = queue_pos % state.corpus.len();
                queue_pos += 1;
                idx
            }
        };
        let seed_input = state.corpus[entry_idx].input.clone();
        let parent = Some(state.corpus[entry_idx].id);

        let ml_round = match config.mix {
            MutatorMix::Havoc => false,
            MutatorMix::Nps => state.model.is_some(),
            MutatorMix::NpsHavoc => {
                state.model.is_some() && round.is_multiple_of(config.ml_round_period)
            }
        };
        round += 1;

        let mut executed_any = false;
        if ml_round {
            // Generate the whole batch first; the model state is immutable
            // while the rng advances.
            let (columns, targeted_edges, bitmap_columns, batch_inputs) = {
                let ms = state.model.as_ref().expect("ml round requires a model");
                let columns =
                    select_target_edges(&ms.bitmap, config.edges_per_ml_round, &mut state.rng);
                let mut targeted_edges = BTreeSet::new();
                let mut batch_inputs = Vec::new();
                for &col in &columns {
                    targeted_edges.extend(ms.bitmap.column_edges(col).iter().copied());
                    let plan = plan_mutations(
                        &ms.model,
                        &seed_input,
                        col,
                        config.gradient_cap,
                        &mut state.rng,
                        &pattern,
                    )
                    .expect("selected columns are in range");
                    batch_inputs.extend(plan.inputs);
                }
                // Every targetable edge was covered by the training corpus.
                debug_assert!(targeted_edges.is_subset(&ms.covered));
                (columns, targeted_edges, ms.bitmap.num_columns(), batch_inputs)
            };

            let mut candidates = 0usize;
            let mut accepted = 0usize;
            for input in batch_inputs {
                if state.clock >= config.budget {
                    break;
                }
                candidates += 1;
                executed_any = true;
                if consider(&mut state, target, config, input, Source::Ml, parent) {
                    accepted += 1;
                }
            }
            state.ml_batches.push(MlBatchRecord {
                time: state.clock,
                training_index: state.model_history.len() - 1,
                targeted_columns: columns,
                targeted_edges,
                bitmap_columns,
                candidates,
                accepted,
            });
        }

        if !executed_any {
            // Havoc round; also the fallback when an ML batch generated no
            // candidates, so every loop iteration consumes budget.
            for _ in 0..config.candidates_per_round {
                if state.clock >= config.budget {
                    break;
                }
                let candidate = havoc(
                    &seed_input,
                    &mut state.rng,
                    &config.havoc,
                    spec.max_input_len,
                );
                consider(
                    &mut state,
                    target,
                    config,
                    candidate,
                    Source::Havoc,
                    parent,
                );
            }
        }
    }

    if state.series.last().map(|&(t, _)| t) != Some(state.clock) {
        state.series.push((state.clock, state.global.len()));
    }

    let final_model = state
        .model
        .as_ref()
        .map(|ms| ModelCheckpoint::from_model(&ms.model, ms.bitmap.edge_index()));
    let source_coverage = SourceCoverage {
        seed: edges_of_source(&state.corpus, Source::Seed).len(),
        havoc: edges_of_source(&state.corpus, Source::Havoc).len(),
        ml: edges_of_source(&state.corpus, Source::Ml).len(),
    };
    Ok(TrialReport {
        target: spec.name,
        config: config.clone(),
        coverage_series: state.series,
        replay_edges: state.global.clone(),
        final_coverage: state.global.len(),
        source_coverage,
        ml_stats: ml_seed_stats_of(&state.corpus),
        corpus: state.corpus,
        crashes: state.crashes,
        executions: state.executions,
        elapsed: state.clock,
        model_history: state.model_history,
        ml_batches: state.ml_batches,
        final_model,
    })
}

fn edges_of_source(corpus: &[CorpusEntry], source: Source) -> BTreeSet<EdgeId> {
    corpus
        .iter()
        .filter(|e| e.source == source)
        .flat_map(|e| e.edges_hit.iter().copied())
        .collect()
}

/// Restrict coverage attribution to entries from one source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFilter {
    All,
    Only(Source),
}

/// Union of edges over corpus entries matching the filter.
pub fn attributed_edges(report: &TrialReport, filter: SourceFilter) -> BTreeSet<EdgeId> {
    report
        .corpus
        .iter()
        .filter(|e| match filter {
            SourceFilter::All => true,
            SourceFilter::Only(source) => e.source == source,
        })
        .flat_map(|e| e.edges_hit.iter().copied())
        .collect()
}

/// Replay-coverage count restricted to entries matching the filter.
pub fn attribute_coverage(report: &TrialReport, filter: SourceFilter) -> usize {
    attributed_edges(report, filter).len()
}

/// Corpus composition statistics for the ML mutator, as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlSeedStats {
    /// ML-source entries over corpus size.
    pub ml_seeds: f64,
    /// Of the ML entries, the fraction that added new coverage when
    /// inserted; 0 when there are no ML entries.
    pub ml_cov_plus: f64,
    /// Entries whose ancestor chain passes through an ML entry, over corpus
    /// size.
    pub derived: f64,
}

pub fn ml_seed_stats(report: &TrialReport) -> MlSeedStats {
    ml_seed_stats_of(&report.corpus)
}

pub fn ml_seed_stats_of(corpus: &[CorpusEntry]) -> MlSeedStats {
    if corpus.is_empty() {
        return MlSeedStats {
            ml_seeds: 0.0,
            ml_cov_plus: 0.0,
            derived: 0.0,
        };
    }
    let by_id: BTreeMap<TestId, &CorpusEntry> = corpus.iter().map(|e| (e.id, e)).collect();
    let ml_entries: Vec<&CorpusEntry> = corpus.iter().filter(|e| e.source == Source::Ml).collect();
    let ml_cov_plus = if ml_entries.is_empty() {
        0.0
    } else {
        ml_entries
            .iter()
            .filter(|e| e.new_edges_at_insertion > 0)
            .count() as f64
            / ml_entries.len() as f64
    };
    let derived = corpus
        .iter()
        .filter(|e| {
            let mut cursor = e.parent;
            while let Some(pid) = cursor {
                let ancestor = by_id.get(&pid).expect("parent chains stay in the corpus");
                if ancestor.source == Source::Ml {
                    return true;
                }
                cursor = ancestor.parent;
            }
            false
        })
        .count() as f64
        / corpus.len() as f64;
    MlSeedStats {
        ml_seeds: ml_entries.len() as f64 / corpus.len() as f64,
        ml_cov_plus,
        derived,
    }
}

/// Set algebra over two replay edge sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeIntersection {
    pub a_size: usize,
    pub b_size: usize,
    pub union_size: usize,
    pub a_only: usize,
    pub b_only: usize,
}

pub fn edge_set_intersection(a: &BTreeSet<EdgeId>, b: &BTreeSet<EdgeId>) -> EdgeIntersection {
    EdgeIntersection {
        a_size: a.len(),
        b_size: b.len(),
        union_size: a.union(b).count(),
        a_only: a.difference(b).count(),
        b_only: b.difference(a).count(),
    }
}

/// Compare the replay edge sets of two reports from the same target.
pub fn edge_intersection(
    a: &TrialReport,
    b: &TrialReport,
) -> Result<EdgeIntersection, EngineError> {
    if a.target != b.target {
        return Err(EngineError::TargetMismatch {
            a: a.target.clone(),
            b: b.target.clone(),
        });
    }
    Ok(edge_set_intersection(&a.replay_edges, &b.replay_edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{BranchLadder, MagicChain};
    use alloc::vec;
    use proptest::prelude::*;

    /// RNG stub whose every draw is the low bound; forces deterministic
    /// single-step havoc in examples.
    struct ZeroRng;
    impl rand::RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(0);
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
            dest.fill(0);
            Ok(())
        }
    }

    fn quick_config(mix: MutatorMix, budget: u64, rng_seed: u64) -> FuzzConfig {
        FuzzConfig {
            rng_seed,
            budget,
            mix,
            retrain: RetrainPolicy {
                min_corpus: 4,
                min_new_testcases: 2,
                min_interval: 200,
            },
            train: TrainConfig {
                hidden: 16,
                epochs: 4,
                restart_period: 2,
                learning_rate: 1e-3,
                holdout_fraction: 0.25,
                batch_size: 8,
                seed: 0,
            },
            train_cost: 50,
            ..FuzzConfig::default()
        }
    }

    #[test]
    fn default_config_pins_published_hyperparameters() {
        let config = FuzzConfig::default();
        assert_eq!(config.gradient_cap, 500);
        assert_eq!(config.retrain.min_corpus, 200);
        assert_eq!(config.retrain.min_new_testcases, 10);
        assert_eq!(config.train.hidden, 4096);
        assert_eq!(config.train.learning_rate, 1e-4);
        assert_eq!(config.train.holdout_fraction, 0.10);
        assert_eq!(config.havoc.chain_min, 1);
        assert_eq!(config.havoc.chain_max, 16);
    }

    #[test]
    fn havoc_forced_bit_flip() {
        let config = HavocConfig {
            chain_min: 1,
            chain_max: 1,
            chunk_max: 8,
        };
        let out = havoc(&[0x07], &mut ZeroRng, &config, 16);
        assert_eq!(out, vec![0x06]); // byte0 XOR 1
    }

    #[test]
    fn havoc_same_seed_same_output() {
        use rand::SeedableRng;
        let config = HavocConfig::default();
        let input = b"some input bytes".to_vec();
        let a = havoc(&input, &mut ChaCha8Rng::seed_from_u64(9), &config, 64);
        let b = havoc(&input, &mut ChaCha8Rng::seed_from_u64(9), &config, 64);
        assert_eq!(a, b);
    }

    #[test]
    fn havoc_never_empties_one_byte_inputs() {
        use rand::SeedableRng;
        let config = HavocConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10_000 {
            let out = havoc(&[0xAB], &mut rng, &config, 8);
            assert!(!out.is_empty());
            assert!(out.len() <= 8);
        }
    }

    #[test]
    fn is_interesting_examples() {
        let global: BTreeSet<EdgeId> = [0].into_iter().collect();
        let found: BTreeSet<EdgeId> = [0, 1].into_iter().collect();
        assert!(is_interesting(&found, &global));

        let global: BTreeSet<EdgeId> = [0, 1].into_iter().collect();
        let found: BTreeSet<EdgeId> = [0].into_iter().collect();
        assert!(!is_interesting(&found, &global));
    }

    #[test]
    fn accepted_entries_stop_being_interesting() {
        let mut global: BTreeSet<EdgeId> = [0].into_iter().collect();
        let found: BTreeSet<EdgeId> = [0, 2].into_iter().collect();
        assert!(is_interesting(&found, &global));
        global.extend(found.iter().copied());
        assert!(!is_interesting(&found, &global));
    }

    #[test]
    fn dedup_crash_examples() {
        let mut seen = BTreeSet::new();
        let sig = CrashSignature { frames: vec![3] };
        assert!(dedup_crash(&sig, &mut seen));
        assert!(!dedup_crash(&sig, &mut seen));

        let longer = CrashSignature { frames: vec![3, 7] };
        assert!(dedup_crash(&longer, &mut seen)); // list equality, not prefix
    }

    #[test]
    fn budget_zero_leaves_only_seeds() {
        let target = MagicChain::new();
        let seeds = vec![b"FUZZ\x42\x00\x99\x00".to_vec(), b"AAAA".to_vec()];
        let config = FuzzConfig {
            budget: 0,
            mix: MutatorMix::Havoc,
            ..FuzzConfig::default()
        };
        let report = run_trial(&target, &seeds, &config).unwrap();
        assert_eq!(report.corpus.len(), 2);
        assert!(report.corpus.iter().all(|e| e.source == Source::Seed));
        assert_eq!(report.final_coverage, 4); // replay of the seeds
    }

    #[test]
    fn no_seeds_is_an_error() {
        let target = MagicChain::new();
        assert_eq!(
            run_trial(&target, &[], &FuzzConfig::default()).unwrap_err(),
            EngineError::NoSeeds
        );
        assert_eq!(
            run_trial(&target, &[Vec::new()], &FuzzConfig::default()).unwrap_err(),
            EngineError::EmptySeed
        );
    }

    #[test]
    fn coverage_series_is_non_decreasing() {
        let target = MagicChain::new();
        let seeds = vec![b"FUZZ\x00\x00\x00\x00".to_vec()];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::Havoc, 3000, 5)).unwrap();
        for w in report.coverage_series.windows(2) {
            assert!(w[0].0 <= w[1].0);
            assert!(w[0].1 <= w[1].1);
        }
        assert!(report.final_coverage >= 2);
    }

    #[test]
    fn identical_runs_produce_identical_reports() {
        let target = BranchLadder::new();
        let seeds = vec![vec![0u8, 13, 26, 39, 1, 1, 1, 1]];
        let config = quick_config(MutatorMix::NpsHavoc, 2500, 42);
        let a = run_trial(&target, &seeds, &config).unwrap();
        let b = run_trial(&target, &seeds, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_edges_match_fresh_execution() {
        let target = BranchLadder::new();
        let seeds = vec![vec![0u8, 13, 26, 39, 2, 2, 2, 2]];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::NpsHavoc, 2000, 7)).unwrap();
        for entry in &report.corpus {
            assert_eq!(execute(&target, &entry.input).edges_hit, entry.edges_hit);
        }
    }

    #[test]
    fn provenance_chains_terminate_at_seeds() {
        let target = BranchLadder::new();
        let seeds = vec![vec![0u8; 8], vec![13u8; 8]];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::NpsHavoc, 2000, 3)).unwrap();
        let by_id: BTreeMap<TestId, &CorpusEntry> =
            report.corpus.iter().map(|e| (e.id, e)).collect();
        for entry in &report.corpus {
            match entry.source {
                Source::Seed => assert!(entry.parent.is_none()),
                _ => assert!(entry.parent.is_some()),
            }
            let mut cursor = entry.parent;
            let mut hops = 0;
            while let Some(pid) = cursor {
                assert!(pid < entry.id, "parents precede children");
                cursor = by_id[&pid].parent;
                hops += 1;
                assert!(hops <= report.corpus.len(), "no cycles");
            }
        }
    }

    #[test]
    fn ml_batches_target_only_covered_edges() {
        let target = BranchLadder::new();
        let seeds = vec![vec![0u8, 13, 26, 39, 9, 9, 9, 9]];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::Nps, 4000, 11)).unwrap();
        assert!(!report.ml_batches.is_empty(), "nps trial should train and mutate");
        for batch in &report.ml_batches {
            let record = &report.model_history[batch.training_index];
            assert!(batch.targeted_edges.is_subset(&record.covered_edges));
            assert!(batch
                .targeted_columns
                .iter()
                .all(|&c| c < batch.bitmap_columns));
        }
    }

    #[test]
    fn havoc_only_trials_never_train() {
        let target = MagicChain::new();
        let seeds = vec![b"FUZZ\x42\x00\x99\x00".to_vec()];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::Havoc, 2000, 1)).unwrap();
        assert!(report.model_history.is_empty());
        assert!(report.ml_batches.is_empty());
        assert!(report.final_model.is_none());
        assert_eq!(attribute_coverage(&report, SourceFilter::Only(Source::Ml)), 0);
    }

    #[test]
    fn attribution_examples() {
        let target = BranchLadder::new();
        let seeds = vec![vec![0u8, 13, 26, 39, 4, 4, 4, 4]];
        let report = run_trial(&target, &seeds, &quick_config(MutatorMix::NpsHavoc, 3000, 21)).unwrap();
        assert_eq!(
            attribute_coverage(&report, SourceFilter::All),
            report.final_coverage
        );
        let per_source: usize = [Source::Seed, Source::Havoc, Source::Ml]
            .iter()
            .map(|&s| attribute_coverage(&report, SourceFilter::Only(s)))
            .max()
            .unwrap();
        assert!(per_source <= report.final_coverage);

        // The embedded summary equals the operation's output.
        assert_eq!(
            report.source_coverage.seed,
            attribute_coverage(&report, SourceFilter::Only(Source::Seed))
        );
        assert_eq!(
            report.source_coverage.ml,
            attribute_coverage(&report, SourceFilter::Only(Source::Ml))
        );
        assert_eq!(report.ml_stats, ml_seed_stats(&report));
    }

    fn synthetic_report(entries: Vec<CorpusEntry>) -> TrialReport {
        let replay_edges: BTreeSet<EdgeId> = entries
            .iter()
            .flat_map(|e| e.edges_hit.iter().copied())
            .collect();
        TrialReport {
            target: String::from("synthetic"),
            config: FuzzConfig::default(),
            coverage_series: Vec::new(),
            final_coverage: replay_edges.len(),
            replay_edges,
            source_coverage: SourceCoverage {
                seed: edges_of_source(&entries, Source::Seed).len(),
                havoc: edges_of_source(&entries, Source::Havoc).len(),
                ml: edges_of_source(&entries, Source::Ml).len(),
            },
            ml_stats: ml_seed_stats_of(&entries),
            corpus: entries,
            crashes: Vec::new(),
            executions: 0,
            elapsed: 0,
            model_history: Vec::new(),
            ml_batches: Vec::new(),
            final_model: None,
        }
    }

    fn entry(
        id: TestId,
        source: Source,
        parent: Option<TestId>,
        new_edges: usize,
    ) -> CorpusEntry {
        CorpusEntry {
            id,
            input: vec![1],
            edges_hit: [0].into_iter().collect(),
            source,
            parent,
            discovered_at: id,
            new_edges_at_insertion: new_edges,
        }
    }

    #[test]
    fn ml_seed_stats_example() {
        // Corpus of 4: one ML entry that found new coverage and one child
        // of it -> (25%, 100%, 25%).
        let report = synthetic_report(vec![
            entry(0, Source::Seed, None, 1),
            entry(1, Source::Havoc, Some(0), 1),
            entry(2, Source::Ml, Some(0), 1),
            entry(3, Source::Havoc, Some(2), 1),
        ]);
        let stats = ml_seed_stats(&report);
        assert_eq!(stats.ml_seeds, 0.25);
        assert_eq!(stats.ml_cov_plus, 1.0);
        assert_eq!(stats.derived, 0.25);
    }

    #[test]
    fn ml_seed_stats_havoc_only_is_zero() {
        let report = synthetic_report(vec![
            entry(0, Source::Seed, None, 1),
            entry(1, Source::Havoc, Some(0), 1),
        ]);
        let stats = ml_seed_stats(&report);
        assert_eq!((stats.ml_seeds, stats.ml_cov_plus, stats.derived), (0.0, 0.0, 0.0));
    }

    #[test]
    fn edge_intersection_examples() {
        let mut a = synthetic_report(vec![entry(0, Source::Seed, None, 1)]);
        a.replay_edges = [0, 1].into_iter().collect();
        let mut b = synthetic_report(vec![entry(0, Source::Seed, None, 1)]);
        b.replay_edges = [0, 2].into_iter().collect();
        let x = edge_intersection(&a, &b).unwrap();
        assert_eq!(
            x,
            EdgeIntersection {
                a_size: 2,
                b_size: 2,
                union_size: 3,
                a_only: 1,
                b_only: 1
            }
        );
        let same = edge_intersection(&a, &a).unwrap();
        assert_eq!((same.a_only, same.b_only), (0, 0));

        let mut other = b.clone();
        other.target = String::from("different");
        assert!(matches!(
            edge_intersection(&a, &other),
            Err(EngineError::TargetMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dedup_matches_hash_set_oracle(
            signatures in prop::collection::vec(prop::collection::vec(0u32..8, 1..4), 1..200)
        ) {
            let mut seen = BTreeSet::new();
            let mut unique = 0usize;
            for frames in &signatures {
                if dedup_crash(&CrashSignature { frames: frames.clone() }, &mut seen) {
                    unique += 1;
                }
            }
            let oracle: std::collections::HashSet<Vec<u32>> =
                signatures.iter().cloned().collect();
            prop_assert_eq!(unique, oracle.len());
            prop_assert_eq!(seen.len(), oracle.len());
        }

        #[test]
        fn edge_set_intersection_matches_brute_force(
            a in prop::collection::btree_set(0u32..40, 0..30),
            b in prop::collection::btree_set(0u32..40, 0..30),
        ) {
            let x = edge_set_intersection(&a, &b);
            let union: BTreeSet<u32> = a.union(&b).copied().collect();
            prop_assert_eq!(x.union_size, union.len());
            prop_assert_eq!(x.a_only, a.iter().filter(|e| !b.contains(e)).count());
            prop_assert_eq!(x.b_only, b.iter().filter(|e| !a.contains(e)).count());
            prop_assert_eq!(x.a_size + x.b_only, x.union_size);
        }

        #[test]
        fn ml_seed_stats_matches_reachability_oracle(
            // Random ancestry: parent of entry i is drawn from entries < i.
            shape in prop::collection::vec((0u8..3, any::<u16>()), 1..40)
        ) {
            let mut entries = Vec::new();
            for (i, &(source_pick, parent_pick)) in shape.iter().enumerate() {
                let source = match source_pick {
                    0 => Source::Seed,
                    1 => Source::Havoc,
                    _ => Source::Ml,
                };
                let (source, parent) = if i == 0 || source == Source::Seed {
                    (Source::Seed, None)
                } else {
                    (source, Some((parent_pick as usize % i) as TestId))
                };
                entries.push(entry(i as TestId, source, parent, 1));
            }
            let report = synthetic_report(entries.clone());
            let stats = ml_seed_stats(&report);

            // BFS oracle over parent links.
            let mut derived = 0usize;
            for e in &entries {
                let mut cursor = e.parent;
                let mut hit = false;
                while let Some(p) = cursor {
                    let ancestor = &entries[p as usize];
                    if ancestor.source == Source::Ml {
                        hit = true;
                        break;
                    }
                    cursor = ancestor.parent;
                }
                if hit {
                    derived += 1;
                }
            }
            let expected = derived as f64 / entries.len() as f64;
            prop_assert!((stats.derived - expected).abs() < 1e-12);
        }
    }
}
