use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use smoothfuzz_cli::campaign::{self, RunOptions};
use smoothfuzz_cli::config::{resolve_out_dir, CampaignFile};
use smoothfuzz_cli::corpus::read_corpus;
use smoothfuzz_cli::formats;
use smoothfuzz_core::bench::aggregate_campaign;
use smoothfuzz_core::coverage::{aggregate, imbalance, replay_coverage, CoverageCache, TestId};
use smoothfuzz_core::mleval::{evaluate, mutation_reachability};
use smoothfuzz_core::smoothing::{ModelCheckpoint, PatternConfig};
use smoothfuzz_core::target::{execute, Target, TargetRegistry};

#[derive(Parser)]
#[command(
    name = "smoothfuzz",
    version,
    about = "Desk-scale fuzzing campaigns with a learned coverage model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded multi-trial campaign from a JSON config.
    Run {
        /// Campaign config file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; relative paths resolve against $SMOOTHFUZZ_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for trial execution.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write each trial's corpus as one file per entry.
        #[arg(long)]
        export_corpus: bool,
    },
    /// Replay a corpus directory and print its edge coverage.
    Replay {
        #[arg(long)]
        target: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the covered edge ids as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Score a model checkpoint against a corpus (per-edge metric table).
    EvalModel {
        /// Model checkpoint (JSON) as written into trial reports.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Directory for metrics.csv and optional exports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export predicted/actual coverage matrices and the corpus bitmap.
        #[arg(long)]
        export_heatmaps: bool,
        /// Export the model-side mutation reachability matrix.
        #[arg(long)]
        export_reachability: bool,
    },
    /// Recompute aggregate tables and plots from stored trial artifacts.
    Report {
        /// Directory holding campaign.json and trials/.
        #[arg(long)]
        from: PathBuf,
        /// Output directory (defaults to the input directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn lookup_target<'a>(registry: &'a TargetRegistry, name: &str) -> Result<&'a dyn Target> {
    registry.get(name).with_context(|| {
        let known: Vec<&str> = registry.names().collect();
        format!("unknown target {name:?}; built-ins: {known:?}")
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let registry = TargetRegistry::with_builtins();

    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            export_corpus,
        } => {
            let file = CampaignFile::load(&config)?;
            let campaign_config = file.resolve()?;
            let target = lookup_target(&registry, &campaign_config.target)?;
            let out_dir = resolve_out_dir(out, "campaign");
            let options = RunOptions {
                jobs,
                export_corpus,
            };
            let report = campaign::run_and_emit(&campaign_config, target, &out_dir, &options)?;
            println!("campaign {} -> {}", report.config_digest, out_dir.display());
            for v in &report.variants {
                println!(
                    "  {:<10} mean {:.1} +/- {:.1} over {} trials, {} unique crashes",
                    v.variant.as_str(),
                    v.mean,
                    v.std,
                    v.trials,
                    v.unique_crashes
                );
            }
        }
        Command::Replay {
            target,
            corpus,
            csv,
        } => {
            let target = lookup_target(&registry, &target)?;
            let inputs = read_corpus(&corpus)?;
            let (edges, count) = replay_coverage(inputs.iter().map(|v| v.as_slice()), target);
            println!("test_cases={} edges={}", inputs.len(), count);
            if let Some(path) = csv {
                fs::write(&path, formats::edges_csv(&edges))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::EvalModel {
            model,
            target,
            corpus,
            threshold,
            out,
            export_heatmaps,
            export_reachability,
        } => {
            if !(threshold > 0.0 && threshold < 1.0) {
                bail!("threshold must be in (0, 1)");
            }
            let target = lookup_target(&registry, &target)?;
            let raw = fs::read_to_string(&model)
                .with_context(|| format!("reading checkpoint {}", model.display()))?;
            let checkpoint: ModelCheckpoint = serde_json::from_str(&raw)?;
            let (net, columns) = checkpoint.into_model()?;

            let inputs = read_corpus(&corpus)?;
            if inputs.is_empty() {
                bail!("corpus directory {} is empty", corpus.display());
            }
            // Ground-truth coverage per test case, once.
            let edge_sets: Vec<_> = inputs
                .iter()
                .map(|input| execute(target, input).edges_hit)
                .collect();
            // Labels against the checkpoint's columns: a merged column is
            // covered when any of its edges is.
            let label_rows: Vec<Vec<bool>> = edge_sets
                .iter()
                .map(|edges| {
                    columns
                        .iter()
                        .map(|group| group.iter().any(|e| edges.contains(e)))
                        .collect()
                })
                .collect();
            let labels: Vec<&[bool]> = label_rows.iter().map(|r| r.as_slice()).collect();
            let input_refs: Vec<&[u8]> = inputs.iter().map(|v| v.as_slice()).collect();
            let metrics = evaluate(&net, &input_refs, &labels, threshold)?;

            // Positive-class rate of the unreduced corpus bitmap.
            let pairs: Vec<(TestId, &[u8])> = input_refs
                .iter()
                .enumerate()
                .map(|(i, &input)| (i as TestId, input))
                .collect();
            let bitmap = aggregate(&pairs, target, &mut CoverageCache::new())?;
            let covered_fraction = imbalance(&bitmap);

            let table = formats::metrics_csv(
                target.spec().name.as_str(),
                covered_fraction,
                &metrics.macro_avg,
            );
            print!("{table}");

            if out.is_some() || export_heatmaps || export_reachability {
                let out_dir = resolve_out_dir(out, "eval-model");
                fs::create_dir_all(&out_dir)?;
                fs::write(out_dir.join("metrics.csv"), &table)?;
                if export_heatmaps {
                    let ids: Vec<u64> = (0..inputs.len() as u64).collect();
                    let col_labels: Vec<String> = columns
                        .iter()
                        .map(|group| {
                            group
                                .iter()
                                .map(|e| e.to_string())
                                .collect::<Vec<_>>()
                                .join("|")
                        })
                        .collect();
                    let predicted: Vec<Vec<bool>> = input_refs
                        .iter()
                        .map(|input| {
                            net.forward(&smoothfuzz_core::smoothing::encode(
                                input,
                                net.input_len(),
                            ))
                            .into_iter()
                            .map(|p| p >= threshold)
                            .collect()
                        })
                        .collect();
                    fs::write(
                        out_dir.join("predicted.csv"),
                        formats::matrix_csv(&ids, &col_labels, &predicted),
                    )?;
                    fs::write(
                        out_dir.join("actual.csv"),
                        formats::matrix_csv(&ids, &col_labels, &label_rows),
                    )?;
                    fs::write(out_dir.join("bitmap.csv"), formats::bitmap_csv(&bitmap))?;
                }
                if export_reachability {
                    let ids: Vec<u64> = (0..inputs.len() as u64).collect();
                    let col_labels: Vec<String> = columns
                        .iter()
                        .map(|group| {
                            group
                                .iter()
                                .map(|e| e.to_string())
                                .collect::<Vec<_>>()
                                .join("|")
                        })
                        .collect();
                    let pattern = PatternConfig::new(target.spec().max_input_len);
                    let gain =
                        mutation_reachability(&net, &input_refs, 500, &pattern, threshold, 0);
                    fs::write(
                        out_dir.join("reachability.csv"),
                        formats::matrix_csv(&ids, &col_labels, &gain),
                    )?;
                }
                println!("wrote {}", out_dir.display());
            }
        }
        Command::Report { from, out } => {
            let (config, trials) = campaign::load_artifacts(&from)?;
            let report = aggregate_campaign(&config, &trials);
            let out_dir = out.unwrap_or(from);
            campaign::emit_reports(&out_dir, &report)?;
            println!("report {} -> {}", report.config_digest, out_dir.display());
        }
    }
    Ok(())
}
