//! Seeded multi-trial campaigns with a common replay metric.
//!
//! A campaign runs `trials` trials per mutator variant; trial `i` always
//! uses rng seed `base_seed + i`, so variants are compared on paired seeds
//! and a rerun reproduces every artifact. Aggregation is a pure function of
//! the stored per-trial reports, which lets the CLI recompute reports
//! byte-identically from disk.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::coverage::TestId;
use crate::engine::{
    edge_set_intersection, ml_seed_stats, run_trial, EdgeIntersection, FuzzConfig, MlSeedStats,
    MutatorMix, TrialReport,
};
use crate::math;
use crate::mleval::MacroMetrics;
use crate::target::{CrashSignature, EdgeId, Target};

pub use crate::engine::EngineError;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BenchError {
    #[error("campaign config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Per-execution virtual-time accounting: every execution consumes its own
/// cost plus the configured transmission overhead.
pub fn apply_overhead(exec_cost: u64, overhead_per_exec: u64) -> u64 {
    exec_cost + overhead_per_exec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub target: String,
    pub variants: Vec<MutatorMix>,
    pub trials: u32,
    pub base_seed: u64,
    pub budget: u64,
    pub overhead_per_exec: u64,
    pub seeds: Vec<Vec<u8>>,
    /// Template for per-trial configs; rng seed, mix, budget and overhead
    /// are overridden per trial.
    pub fuzz: FuzzConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            target: String::new(),
            variants: Vec::new(),
            trials: 30,
            base_seed: 0,
            budget: 10_000,
            overhead_per_exec: 0,
            seeds: Vec::new(),
            fuzz: FuzzConfig::default(),
        }
    }
}

impl CampaignConfig {
    /// The exact per-trial config for `variant`, trial index `index`.
    pub fn trial_config(&self, variant: MutatorMix, index: u32) -> FuzzConfig {
        FuzzConfig {
            rng_seed: self.base_seed + index as u64,
            mix: variant,
            budget: self.budget,
            overhead_per_exec: self.overhead_per_exec,
            ..self.fuzz.clone()
        }
    }

    pub fn validate(&self, target: Option<&dyn Target>) -> Result<(), BenchError> {
        if self.variants.is_empty() {
            return Err(BenchError::InvalidConfig("no variants configured"));
        }
        let unique: BTreeSet<MutatorMix> = self.variants.iter().copied().collect();
        if unique.len() != self.variants.len() {
            return Err(BenchError::InvalidConfig("duplicate variants"));
        }
        if self.trials == 0 {
            return Err(BenchError::InvalidConfig("trials must be >= 1"));
        }
        if self.budget == 0 {
            return Err(BenchError::InvalidConfig("budget must be >= 1"));
        }
        if self.seeds.is_empty() || self.seeds.iter().any(|s| s.is_empty()) {
            return Err(BenchError::InvalidConfig("seeds must be non-empty"));
        }
        if let Some(t) = target {
            if t.spec().name != self.target {
                return Err(BenchError::InvalidConfig("target does not match config"));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the canonical JSON form, stored in reports so
    /// a rerun can be checked against the exact configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        let mut out = String::new();
        for shift in (0..16).rev() {
            let nibble = ((hash >> (shift * 4)) & 0xf) as u32;
            out.push(char::from_digit(nibble, 16).expect("nibble"));
        }
        out
    }
}

/// One point of an aggregated coverage-over-time curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStat {
    pub time: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: MutatorMix,
    pub trials: u32,
    /// Final replay coverage per trial, in trial order.
    pub final_coverage: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Mean coverage over time with a 95% confidence band, sampled at the
    /// union of all trial event times.
    pub series: Vec<SeriesStat>,
    /// Crash signatures after dedup across the variant's trials.
    pub crash_signatures: Vec<CrashSignature>,
    pub unique_crashes: usize,
    /// ML seed statistics averaged over trials.
    pub ml_stats: MlSeedStats,
    /// Holdout metrics of each trial's last trained model, averaged over
    /// the trials that trained at least once. `None` when none did.
    pub model_metrics_mean: Option<MacroMetrics>,
    /// Edges reached by any trial of this variant.
    pub pooled_edges: BTreeSet<EdgeId>,
}

/// Pairwise pooled-edge comparison between two variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantPair {
    pub a: MutatorMix,
    pub b: MutatorMix,
    pub edges: EdgeIntersection,
}

/// Identifier of the one coverage metric applied to every variant: replay
/// the final corpus and count the union of edges.
pub const REPLAY_METRIC: &str = "corpus_replay_edges";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub target: String,
    pub base_seed: u64,
    pub config_digest: String,
    /// Always [`REPLAY_METRIC`]; stored so comparisons across reports can
    /// assert they used the same procedure.
    pub metric: String,
    pub variants: Vec<VariantSummary>,
    pub pairs: Vec<VariantPair>,
}

/// Sample mean and standard deviation (n - 1 denominator, 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var))
}

/// 95% confidence interval as mean +/- 1.96 std / sqrt(n).
pub fn ci95(mean: f64, std: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (mean, mean);
    }
    let half = 1.96 * std / math::sqrt(n as f64);
    (mean - half, mean + half)
}

/// Step-function value of a coverage series at time `t` (0 before the first
/// point).
fn series_value_at(series: &[(u64, usize)], t: u64) -> usize {
    let mut value = 0;
    for &(time, count) in series {
        if time > t {
            break;
        }
        value = count;
    }
    value
}

fn aggregate_series(reports: &[TrialReport]) -> Vec<SeriesStat> {
    let grid: BTreeSet<u64> = reports
        .iter()
        .flat_map(|r| r.coverage_series.iter().map(|&(t, _)| t))
        .collect();
    grid.into_iter()
        .map(|t| {
            let values: Vec<f64> = reports
                .iter()
                .map(|r| series_value_at(&r.coverage_series, t) as f64)
                .collect();
            let (mean, std) = mean_std(&values);
            let (ci_low, ci_high) = ci95(mean, std, values.len());
            SeriesStat {
                time: t,
                mean,
                ci_low,
                ci_high,
            }
        })
        .collect()
}

fn summarize_variant(variant: MutatorMix, trials: &[TrialReport]) -> VariantSummary {
    let final_coverage: Vec<usize> = trials.iter().map(|r| r.final_coverage).collect();
    let values: Vec<f64> = final_coverage.iter().map(|&c| c as f64).collect();
    let (mean, std) = mean_std(&values);
    let (ci95_low, ci95_high) = ci95(mean, std, values.len());

    let mut seen = BTreeSet::new();
    let mut crash_signatures = Vec::new();
    for report in trials {
        for signature in &report.crashes {
            if seen.insert(signature.clone()) {
                crash_signatures.push(signature.clone());
            }
        }
    }

    let stats: Vec<MlSeedStats> = trials.iter().map(ml_seed_stats).collect();
    let n = stats.len() as f64;
    let ml_stats = MlSeedStats {
        ml_seeds: stats.iter().map(|s| s.ml_seeds).sum::<f64>() / n,
        ml_cov_plus: stats.iter().map(|s| s.ml_cov_plus).sum::<f64>() / n,
        derived: stats.iter().map(|s| s.derived).sum::<f64>() / n,
    };

    let pooled_edges: BTreeSet<EdgeId> = trials
        .iter()
        .flat_map(|r| r.replay_edges.iter().copied())
        .collect();

    let trained: Vec<&MacroMetrics> = trials
        .iter()
        .filter_map(|r| r.model_history.last().map(|m| &m.holdout_metrics))
        .collect();
    let model_metrics_mean = if trained.is_empty() {
        None
    } else {
        let k = trained.len() as f64;
        Some(MacroMetrics {
            accuracy: trained.iter().map(|m| m.accuracy).sum::<f64>() / k,
            precision: trained.iter().map(|m| m.precision).sum::<f64>() / k,
            recall: trained.iter().map(|m| m.recall).sum::<f64>() / k,
            f1: trained.iter().map(|m| m.f1).sum::<f64>() / k,
            pr_auc: trained.iter().map(|m| m.pr_auc).sum::<f64>() / k,
            pr_auc_excluded: math::round(
                trained.iter().map(|m| m.pr_auc_excluded as f64).sum::<f64>() / k,
            ) as usize,
        })
    };

    VariantSummary {
        variant,
        trials: trials.len() as u32,
        final_coverage,
        mean,
        std,
        ci95_low,
        ci95_high,
        series: aggregate_series(trials),
        unique_crashes: crash_signatures.len(),
        crash_signatures,
        ml_stats,
        model_metrics_mean,
        pooled_edges,
    }
}

/// Aggregate stored per-trial reports into a campaign report. Pure: calling
/// this again on the same inputs reproduces the report exactly, regardless
/// of the order trials were executed in.
pub fn aggregate_campaign(
    config: &CampaignConfig,
    trials: &[(MutatorMix, Vec<TrialReport>)],
) -> CampaignReport {
    let variants: Vec<VariantSummary> = trials
        .iter()
        .map(|(variant, reports)| summarize_variant(*variant, reports))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..variants.len() {
        for j in (i + 1)..variants.len() {
            pairs.push(VariantPair {
                a: variants[i].variant,
                b: variants[j].variant,
                edges: edge_set_intersection(&variants[i].pooled_edges, &variants[j].pooled_edges),
            });
        }
    }
    CampaignReport {
        target: config.target.clone(),
        base_seed: config.base_seed,
        config_digest: config.digest(),
        metric: String::from(REPLAY_METRIC),
        variants,
        pairs,
    }
}

/// Run every (variant, trial) pair sequentially and aggregate. Trials are
/// independent, so a parallel driver can produce the identical report by
/// running `trial_config` jobs in any order and aggregating the results in
/// (variant, index) order.
pub fn run_campaign(
    config: &CampaignConfig,
    target: &dyn Target,
) -> Result<CampaignReport, BenchError> {
    config.validate(Some(target))?;
    let mut all = Vec::with_capacity(config.variants.len());
    for &variant in &config.variants {
        let mut reports = Vec::with_capacity(config.trials as usize);
        for i in 0..config.trials {
            let trial_config = config.trial_config(variant, i);
            reports.push(run_trial(target, &config.seeds, &trial_config)?);
        }
        all.push((variant, reports));
    }
    Ok(aggregate_campaign(config, &all))
}

/// Deterministic seed corpus: `count` uniformly random inputs of `len`
/// bytes from a seeded generator. Useful for meeting a minimum-corpus gate
/// in experiments.
pub fn random_seed_corpus(count: usize, len: usize, seed: u64) -> Vec<Vec<u8>> {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut buf = alloc::vec![0u8; len.max(1)];
            rng.fill_bytes(&mut buf);
            buf
        })
        .collect()
}

/// Sequence corpus ids for externally supplied test cases.
pub fn indexed_corpus(inputs: &[Vec<u8>]) -> Vec<(TestId, &[u8])> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, v)| (i as TestId, v.as_slice()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MutatorMix;
    use crate::smoothing::{RetrainPolicy, TrainConfig};
    use crate::target::BranchLadder;
    use alloc::vec;

    fn small_campaign(trials: u32, variants: Vec<MutatorMix>) -> CampaignConfig {
        CampaignConfig {
            target: String::from("branch_ladder"),
            variants,
            trials,
            base_seed: 100,
            budget: 1500,
            overhead_per_exec: 0,
            seeds: vec![vec![0u8, 13, 26, 39, 1, 2, 3, 4]],
            fuzz: FuzzConfig {
                retrain: RetrainPolicy {
                    min_corpus: 4,
                    min_new_testcases: 2,
                    min_interval: 300,
                },
                train: TrainConfig {
                    hidden: 8,
                    epochs: 3,
                    restart_period: 2,
                    learning_rate: 1e-3,
                    holdout_fraction: 0.25,
                    batch_size: 8,
                    seed: 0,
                },
                train_cost: 50,
                ..FuzzConfig::default()
            },
        }
    }

    #[test]
    fn apply_overhead_examples() {
        assert_eq!(apply_overhead(1, 0), 1);
        assert_eq!(apply_overhead(1, 1), 2); // halves executions per budget
        assert_eq!(apply_overhead(3, 9), 12);
    }

    #[test]
    fn overhead_shrinks_execution_count() {
        let target = BranchLadder::new();
        let config = small_campaign(1, vec![MutatorMix::Havoc]);
        let fast = run_trial(
            &target,
            &config.seeds,
            &config.trial_config(MutatorMix::Havoc, 0),
        )
        .unwrap();
        let mut slow_config = config.trial_config(MutatorMix::Havoc, 0);
        slow_config.overhead_per_exec = 1;
        let slow = run_trial(&target, &config.seeds, &slow_config).unwrap();
        // overhead == exec_cost -> about half the executions.
        let ratio = slow.executions as f64 / fast.executions as f64;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn single_trial_has_zero_std() {
        let target = BranchLadder::new();
        let report = run_campaign(&small_campaign(1, vec![MutatorMix::Havoc]), &target).unwrap();
        assert_eq!(report.variants[0].std, 0.0);
        assert_eq!(report.variants[0].ci95_low, report.variants[0].mean);
    }

    #[test]
    fn rerun_reproduces_the_report() {
        let target = BranchLadder::new();
        let config = small_campaign(2, vec![MutatorMix::Havoc, MutatorMix::NpsHavoc]);
        let a = run_campaign(&config, &target).unwrap();
        let b = run_campaign(&config, &target).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reported_mean_matches_stored_finals() {
        let target = BranchLadder::new();
        let config = small_campaign(3, vec![MutatorMix::Havoc]);
        let report = run_campaign(&config, &target).unwrap();
        let summary = &report.variants[0];
        let recomputed =
            summary.final_coverage.iter().sum::<usize>() as f64 / summary.trials as f64;
        assert!((summary.mean - recomputed).abs() < 1e-12);
    }

    #[test]
    fn aggregation_is_independent_of_trial_execution_order() {
        let target = BranchLadder::new();
        let config = small_campaign(3, vec![MutatorMix::Havoc]);
        // Run trials out of order and aggregate in index order.
        let mut reports = vec![None, None, None];
        for &i in &[2u32, 0, 1] {
            let trial_config = config.trial_config(MutatorMix::Havoc, i);
            reports[i as usize] = Some(run_trial(&target, &config.seeds, &trial_config).unwrap());
        }
        let shuffled: Vec<TrialReport> = reports.into_iter().map(Option::unwrap).collect();
        let direct = run_campaign(&config, &target).unwrap();
        let reaggregated = aggregate_campaign(&config, &[(MutatorMix::Havoc, shuffled)]);
        assert_eq!(direct, reaggregated);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let target = BranchLadder::new();
        let mut config = small_campaign(1, vec![]);
        assert!(matches!(
            run_campaign(&config, &target),
            Err(BenchError::InvalidConfig(_))
        ));
        config = small_campaign(0, vec![MutatorMix::Havoc]);
        assert!(config.validate(None).is_err());
        config = small_campaign(1, vec![MutatorMix::Havoc, MutatorMix::Havoc]);
        assert!(config.validate(None).is_err());
        config = small_campaign(1, vec![MutatorMix::Havoc]);
        config.seeds.clear();
        assert!(config.validate(None).is_err());
        config = small_campaign(1, vec![MutatorMix::Havoc]);
        config.target = String::from("unknown");
        assert!(matches!(
            run_campaign(&config, &target),
            Err(BenchError::InvalidConfig(_))
        ));
    }

    #[test]
    fn digest_is_stable_and_config_sensitive() {
        let a = small_campaign(2, vec![MutatorMix::Havoc]);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.base_seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }

    #[test]
    fn series_stats_are_monotone_in_time() {
        let target = BranchLadder::new();
        let config = small_campaign(2, vec![MutatorMix::Havoc]);
        let report = run_campaign(&config, &target).unwrap();
        let series = &report.variants[0].series;
        for w in series.windows(2) {
            assert!(w[0].time < w[1].time);
            assert!(w[0].mean <= w[1].mean + 1e-12);
        }
    }

    #[test]
    fn every_variant_is_scored_by_the_same_metric() {
        let target = BranchLadder::new();
        let config = small_campaign(1, vec![MutatorMix::Havoc, MutatorMix::Nps]);
        let report = run_campaign(&config, &target).unwrap();
        assert_eq!(report.metric, REPLAY_METRIC);

        // The reported final is literally the replay count of each trial's
        // corpus, for every variant.
        for (v, &variant) in config.variants.iter().enumerate() {
            let trial = run_trial(&target, &config.seeds, &config.trial_config(variant, 0)).unwrap();
            let (_, replayed) = crate::coverage::replay_coverage(
                trial.corpus.iter().map(|e| e.input.as_slice()),
                &target,
            );
            assert_eq!(report.variants[v].final_coverage[0], replayed);
        }
    }

    #[test]
    fn mean_std_handles_degenerate_inputs() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        let (mean, std) = mean_std(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((std - math::sqrt(2.0)).abs() < 1e-12);
    }
}
