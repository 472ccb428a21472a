//! Campaign execution and artifact persistence.
//!
//! Layout under the output directory:
//!
//! ```text
//! campaign.json            resolved core config (exact seeds included)
//! report.json              aggregated CampaignReport
//! summary.csv              variant, mean, std, CI, crashes
//! series_<variant>.csv     coverage-over-time aggregate per variant
//! crashes.csv              deduplicated crash signatures
//! pairs.csv                pooled-edge comparison between variants
//! coverage.svg             mean coverage chart with confidence bands
//! trials/<variant>/trial_NNN.json
//! trials/<variant>/corpus_NNN/   (only with --export-corpus)
//! ```
//!
//! Trials are dispatched to a worker pool; each worker runs isolated trials
//! and results are stored by (variant, index), so the report is identical
//! for any worker count or completion order.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use smoothfuzz_core::bench::{aggregate_campaign, CampaignConfig, CampaignReport};
use smoothfuzz_core::engine::{run_trial, MutatorMix, TrialReport};
use smoothfuzz_core::target::Target;

use crate::corpus::write_corpus;
use crate::formats;
use crate::svg;

/// Per-variant trial reports in (variant, index) order.
pub type VariantTrials = Vec<(MutatorMix, Vec<TrialReport>)>;

pub struct RunOptions {
    pub jobs: usize,
    pub export_corpus: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            export_corpus: false,
        }
    }
}

/// Run all (variant, trial) pairs on `jobs` workers. Panics in a worker
/// (which only happen on engine bugs) propagate as errors.
pub fn run_trials_parallel(
    config: &CampaignConfig,
    target: &dyn Target,
    jobs: usize,
) -> Result<VariantTrials> {
    let tasks: Vec<(usize, u32)> = (0..config.variants.len())
        .flat_map(|v| (0..config.trials).map(move |i| (v, i)))
        .collect();
    let results: Mutex<Vec<Option<TrialReport>>> =
        Mutex::new(tasks.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(tasks.len().max(1));

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    let slot = next.fetch_add(1, Ordering::Relaxed);
                    if slot >= tasks.len() {
                        return Ok(());
                    }
                    let (variant_idx, trial_idx) = tasks[slot];
                    let trial_config =
                        config.trial_config(config.variants[variant_idx], trial_idx);
                    let report = run_trial(target, &config.seeds, &trial_config)?;
                    results.lock().expect("no poisoned worker").insert_report(slot, report);
                }
            }));
        }
        for handle in handles {
            match handle.join() {
                Ok(result) => result?,
                Err(_) => bail!("a trial worker panicked"),
            }
        }
        Ok(())
    })?;

    let mut flat = results.into_inner().expect("workers joined");
    let mut out = Vec::with_capacity(config.variants.len());
    for (v, &variant) in config.variants.iter().enumerate() {
        let mut reports = Vec::with_capacity(config.trials as usize);
        for i in 0..config.trials as usize {
            let slot = v * config.trials as usize + i;
            reports.push(flat[slot].take().expect("every task ran"));
        }
        out.push((variant, reports));
    }
    Ok(out)
}

trait SlotInsert {
    fn insert_report(&mut self, slot: usize, report: TrialReport);
}

impl SlotInsert for Vec<Option<TrialReport>> {
    fn insert_report(&mut self, slot: usize, report: TrialReport) {
        self[slot] = Some(report);
    }
}

fn write_if_changed(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn trial_path(out_dir: &Path, variant: MutatorMix, index: usize) -> PathBuf {
    out_dir
        .join("trials")
        .join(variant.as_str())
        .join(format!("trial_{index:03}.json"))
}

/// Persist per-trial reports and the aggregate artifacts.
pub fn emit_all(
    out_dir: &Path,
    config: &CampaignConfig,
    trials: &[(MutatorMix, Vec<TrialReport>)],
    report: &CampaignReport,
    export_corpus: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_if_changed(
        &out_dir.join("campaign.json"),
        &serde_json::to_string_pretty(config)?,
    )?;
    for (variant, reports) in trials {
        for (i, trial) in reports.iter().enumerate() {
            let path = trial_path(out_dir, *variant, i);
            fs::create_dir_all(path.parent().expect("trial path has a parent"))?;
            write_if_changed(&path, &serde_json::to_string(trial)?)?;
            write_if_changed(
                &path.with_file_name(format!("series_{i:03}.csv")),
                &formats::trial_series_csv(trial),
            )?;
            if export_corpus {
                let corpus_dir = path
                    .parent()
                    .expect("trial path has a parent")
                    .join(format!("corpus_{i:03}"));
                write_corpus(&corpus_dir, trial)?;
            }
        }
    }
    emit_reports(out_dir, report)
}

/// Write the aggregate tables and chart for a finished campaign. Pure
/// function of the report: re-emission is byte-identical.
pub fn emit_reports(out_dir: &Path, report: &CampaignReport) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_if_changed(&out_dir.join("report.json"), &serde_json::to_string_pretty(report)?)?;
    write_if_changed(&out_dir.join("summary.csv"), &formats::summary_csv(report))?;
    for v in &report.variants {
        write_if_changed(
            &out_dir.join(format!("series_{}.csv", v.variant)),
            &formats::series_csv(v),
        )?;
    }
    write_if_changed(&out_dir.join("crashes.csv"), &formats::crashes_csv(report))?;
    write_if_changed(&out_dir.join("pairs.csv"), &formats::pairs_csv(report))?;
    write_if_changed(&out_dir.join("coverage.svg"), &svg::coverage_chart(report))?;
    Ok(())
}

/// Load the stored config and per-trial reports back from an output
/// directory, in (variant, index) order.
pub fn load_artifacts(out_dir: &Path) -> Result<(CampaignConfig, VariantTrials)> {
    let config: CampaignConfig = serde_json::from_str(
        &fs::read_to_string(out_dir.join("campaign.json"))
            .with_context(|| format!("no campaign.json under {}", out_dir.display()))?,
    )?;
    let mut trials = Vec::new();
    for &variant in &config.variants {
        let mut reports = Vec::new();
        for i in 0..config.trials as usize {
            let path = trial_path(out_dir, variant, i);
            let raw = fs::read_to_string(&path)
                .with_context(|| format!("missing trial artifact {}", path.display()))?;
            reports.push(serde_json::from_str(&raw)?);
        }
        trials.push((variant, reports));
    }
    Ok((config, trials))
}

/// Run a campaign end to end and write all artifacts. Returns the report.
pub fn run_and_emit(
    config: &CampaignConfig,
    target: &dyn Target,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<CampaignReport> {
    config.validate(Some(target))?;
    let trials = run_trials_parallel(config, target, options.jobs)?;
    let report = aggregate_campaign(config, &trials);
    emit_all(out_dir, config, &trials, &report, options.export_corpus)?;
    Ok(report)
}
