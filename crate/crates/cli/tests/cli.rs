//! End-to-end checks of the `smoothfuzz` binary: artifact layout, exit
//! codes, re-emission idempotence, and the replay/eval-model round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn smoothfuzz(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smoothfuzz"));
    cmd.args(args);
    cmd.env_remove("SMOOTHFUZZ_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("campaign.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const LADDER_CAMPAIGN: &str = r#"{
    "target": "branch_ladder",
    "variants": ["havoc", "nps"],
    "trials": 2,
    "base_seed": 3,
    "budget": 3000,
    "seeds": [
        {"bytes": [0, 13, 26, 39, 7, 7, 7, 7]},
        {"random": {"count": 24, "len": 10, "seed": 5}}
    ],
    "fuzz": {
        "retrain": {"min_corpus": 20, "min_new_testcases": 4, "min_interval": 400},
        "train": {
            "hidden": 8, "epochs": 3, "restart_period": 2,
            "learning_rate": 0.001, "holdout_fraction": 0.2,
            "batch_size": 8, "seed": 0
        },
        "train_cost": 100
    }
}"#;

#[test]
fn run_emits_all_artifacts_and_is_deterministic_across_jobs() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), LADDER_CAMPAIGN);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");

    let ran = smoothfuzz(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out_a.to_str().unwrap(),
            "--jobs",
            "1",
            "--export-corpus",
        ],
        &[],
    );
    assert!(ran.status.success(), "{}", String::from_utf8_lossy(&ran.stderr));

    for file in [
        "campaign.json",
        "report.json",
        "summary.csv",
        "series_havoc.csv",
        "series_nps.csv",
        "crashes.csv",
        "pairs.csv",
        "coverage.svg",
        "trials/havoc/trial_000.json",
        "trials/havoc/trial_001.json",
        "trials/havoc/series_000.csv",
        "trials/nps/trial_000.json",
        "trials/nps/trial_001.json",
        "trials/nps/series_001.csv",
    ] {
        assert!(out_a.join(file).is_file(), "missing {file}");
    }
    assert!(out_a.join("trials/havoc/corpus_000").is_dir());

    // Same campaign on a parallel worker pool: byte-identical artifacts.
    let ran = smoothfuzz(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out_b.to_str().unwrap(),
            "--jobs",
            "4",
        ],
        &[],
    );
    assert!(ran.status.success());
    for file in ["report.json", "summary.csv", "series_nps.csv", "coverage.svg"] {
        assert_eq!(
            fs::read(out_a.join(file)).unwrap(),
            fs::read(out_b.join(file)).unwrap(),
            "{file} differs between --jobs 1 and --jobs 4"
        );
    }

    // Branch ladder has no crashing branch: header-only crash table.
    assert_eq!(
        fs::read_to_string(out_a.join("crashes.csv")).unwrap(),
        "variant,signature\n"
    );

    // Time column of each series CSV is strictly increasing.
    let series = fs::read_to_string(out_a.join("series_havoc.csv")).unwrap();
    let times: Vec<u64> = series
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn report_reemission_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), LADDER_CAMPAIGN);
    let out = tmp.path().join("campaign");
    let ran = smoothfuzz(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(ran.status.success());

    let original = fs::read(out.join("report.json")).unwrap();
    let original_summary = fs::read(out.join("summary.csv")).unwrap();
    // Clobber the aggregates, then rebuild them from the stored trials.
    fs::write(out.join("report.json"), b"garbage").unwrap();
    fs::write(out.join("summary.csv"), b"garbage").unwrap();

    let rebuilt = smoothfuzz(&["report", "--from", out.to_str().unwrap()], &[]);
    assert!(rebuilt.status.success(), "{}", String::from_utf8_lossy(&rebuilt.stderr));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), original);
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), original_summary);
}

#[test]
fn replay_matches_the_trial_report() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), LADDER_CAMPAIGN);
    let out = tmp.path().join("campaign");
    let ran = smoothfuzz(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--export-corpus",
        ],
        &[],
    );
    assert!(ran.status.success());

    let trial: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trials/havoc/trial_000.json")).unwrap())
            .unwrap();
    let expected = trial["final_coverage"].as_u64().unwrap();

    let corpus = out.join("trials/havoc/corpus_000");
    let edges_csv = tmp.path().join("edges.csv");
    let replayed = smoothfuzz(
        &[
            "replay",
            "--target",
            "branch_ladder",
            "--corpus",
            corpus.to_str().unwrap(),
            "--csv",
            edges_csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(replayed.status.success());
    let stdout = String::from_utf8(replayed.stdout).unwrap();
    assert!(
        stdout.contains(&format!("edges={expected}")),
        "replay said {stdout:?}, expected edges={expected}"
    );
    let csv = fs::read_to_string(&edges_csv).unwrap();
    assert_eq!(csv.lines().count() as u64, expected + 1); // header + edges
}

#[test]
fn eval_model_scores_a_stored_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), LADDER_CAMPAIGN);
    let out = tmp.path().join("campaign");
    let ran = smoothfuzz(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--export-corpus",
        ],
        &[],
    );
    assert!(ran.status.success());

    let trial: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trials/nps/trial_000.json")).unwrap())
            .unwrap();
    let checkpoint = &trial["final_model"];
    assert!(!checkpoint.is_null(), "nps trial should store its final model");
    let model_path = tmp.path().join("model.json");
    fs::write(&model_path, serde_json::to_string(checkpoint).unwrap()).unwrap();

    let eval_out = tmp.path().join("eval");
    let evaluated = smoothfuzz(
        &[
            "eval-model",
            "--model",
            model_path.to_str().unwrap(),
            "--target",
            "branch_ladder",
            "--corpus",
            out.join("trials/nps/corpus_000").to_str().unwrap(),
            "--out",
            eval_out.to_str().unwrap(),
            "--export-heatmaps",
            "--export-reachability",
        ],
        &[],
    );
    assert!(
        evaluated.status.success(),
        "{}",
        String::from_utf8_lossy(&evaluated.stderr)
    );
    let stdout = String::from_utf8(evaluated.stdout).unwrap();
    assert!(stdout.contains("covered_edges_pct"));

    for file in [
        "metrics.csv",
        "predicted.csv",
        "actual.csv",
        "bitmap.csv",
        "reachability.csv",
    ] {
        assert!(eval_out.join(file).is_file(), "missing {file}");
    }
    // Heatmap matrices share the checkpoint's column layout.
    let predicted = fs::read_to_string(eval_out.join("predicted.csv")).unwrap();
    let actual = fs::read_to_string(eval_out.join("actual.csv")).unwrap();
    assert_eq!(predicted.lines().next(), actual.lines().next());
}

#[test]
fn configuration_errors_exit_nonzero_before_running() {
    let tmp = TempDir::new().unwrap();

    // Unknown target.
    let bad_target = LADDER_CAMPAIGN.replace("branch_ladder", "no_such_target");
    let config = write_config(tmp.path(), &bad_target);
    let out = tmp.path().join("never");
    let ran = smoothfuzz(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(!ran.status.success());
    assert!(!out.exists(), "no artifacts on configuration errors");

    // Unknown variant is a parse error.
    let bad_variant = LADDER_CAMPAIGN.replace("\"havoc\"", "\"mystery\"");
    let config = write_config(tmp.path(), &bad_variant);
    assert!(!smoothfuzz(&["run", "--config", &config], &[]).status.success());

    // Zero trials fail validation.
    let zero_trials = LADDER_CAMPAIGN.replace("\"trials\": 2", "\"trials\": 0");
    let config = write_config(tmp.path(), &zero_trials);
    assert!(!smoothfuzz(&["run", "--config", &config], &[]).status.success());

    // Missing corpus directory.
    let replayed = smoothfuzz(
        &["replay", "--target", "branch_ladder", "--corpus", "/nonexistent"],
        &[],
    );
    assert!(!replayed.status.success());
}

#[test]
fn out_root_env_var_anchors_relative_outputs() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), LADDER_CAMPAIGN);
    let root = tmp.path().join("root");
    fs::create_dir_all(&root).unwrap();

    let ran = smoothfuzz(
        &["run", "--config", &config, "--out", "nested/campaign"],
        &[("SMOOTHFUZZ_OUT", root.to_str().unwrap())],
    );
    assert!(ran.status.success(), "{}", String::from_utf8_lossy(&ran.stderr));
    assert!(root.join("nested/campaign/report.json").is_file());
}
