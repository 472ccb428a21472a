//! CSV table builders. Every function is a pure string builder; float
//! formatting goes through Rust's shortest-roundtrip `Display`, so
//! re-emitting the same data is byte-identical.

use smoothfuzz_core::bench::{CampaignReport, VariantSummary};
use smoothfuzz_core::coverage::CoverageBitmap;
use smoothfuzz_core::mleval::MacroMetrics;
use smoothfuzz_core::target::CrashSignature;

/// `variant,trials,mean,std,ci95_low,ci95_high,unique_crashes`
pub fn summary_csv(report: &CampaignReport) -> String {
    let mut out = String::from("variant,trials,mean,std,ci95_low,ci95_high,unique_crashes\n");
    for v in &report.variants {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            v.variant, v.trials, v.mean, v.std, v.ci95_low, v.ci95_high, v.unique_crashes
        ));
    }
    out
}

/// One trial's raw coverage series: `time,edges`.
pub fn trial_series_csv(report: &smoothfuzz_core::engine::TrialReport) -> String {
    let mut out = String::from("time,edges\n");
    for &(time, edges) in &report.coverage_series {
        out.push_str(&format!("{time},{edges}\n"));
    }
    out
}

/// `time,mean,ci_low,ci_high`, monotone in the time column.
pub fn series_csv(summary: &VariantSummary) -> String {
    let mut out = String::from("time,mean,ci_low,ci_high\n");
    for p in &summary.series {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.time, p.mean, p.ci_low, p.ci_high
        ));
    }
    out
}

pub fn signature_label(signature: &CrashSignature) -> String {
    signature
        .frames
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// `variant,signature`; header only when no crashes were found.
pub fn crashes_csv(report: &CampaignReport) -> String {
    let mut out = String::from("variant,signature\n");
    for v in &report.variants {
        for signature in &v.crash_signatures {
            out.push_str(&format!("{},{}\n", v.variant, signature_label(signature)));
        }
    }
    out
}

/// Pairwise pooled-edge comparison table.
pub fn pairs_csv(report: &CampaignReport) -> String {
    let mut out = String::from("a,b,a_edges,b_edges,union,a_only,b_only\n");
    for pair in &report.pairs {
        let e = &pair.edges;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            pair.a, pair.b, e.a_size, e.b_size, e.union_size, e.a_only, e.b_only
        ));
    }
    out
}

/// Model metric table in the usual column layout: percentage of covered
/// edges, then accuracy, precision, recall, F1 and PR-AUC.
pub fn metrics_csv(target: &str, covered_fraction: f64, metrics: &MacroMetrics) -> String {
    let mut out = String::from(
        "target,covered_edges_pct,accuracy,precision,recall,f1,pr_auc,pr_auc_excluded_edges\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        target,
        covered_fraction * 100.0,
        metrics.accuracy,
        metrics.precision,
        metrics.recall,
        metrics.f1,
        metrics.pr_auc,
        metrics.pr_auc_excluded
    ));
    out
}

fn column_label(edges: &std::collections::BTreeSet<u32>) -> String {
    edges
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

/// Bitmap as CSV: `id` column then one 0/1 column per edge group, the
/// header carrying the original edge ids (merged columns joined by `|`).
pub fn bitmap_csv(bitmap: &CoverageBitmap) -> String {
    let mut out = String::from("id");
    for edges in bitmap.edge_index() {
        out.push(',');
        out.push_str(&column_label(edges));
    }
    out.push('\n');
    for (row, id) in bitmap.rows().iter().zip(bitmap.corpus_ids()) {
        out.push_str(&id.to_string());
        for &cell in row {
            out.push_str(if cell { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// Generic boolean matrix CSV for heatmap exports.
pub fn matrix_csv(row_ids: &[u64], column_labels: &[String], rows: &[Vec<bool>]) -> String {
    let mut out = String::from("id");
    for label in column_labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (id, row) in row_ids.iter().zip(rows) {
        out.push_str(&id.to_string());
        for &cell in row {
            out.push_str(if cell { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// One edge id per line, for `replay --csv`.
pub fn edges_csv(edges: &std::collections::BTreeSet<u32>) -> String {
    let mut out = String::from("edge\n");
    for e in edges {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
