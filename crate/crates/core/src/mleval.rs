//! Per-edge model-quality metrics and qualitative coverage matrices.
//!
//! The learning task is multi-label binary classification: one prediction
//! per reduced-bitmap column. Metrics are computed for each edge
//! independently, then macro-averaged. Accuracy is reported for
//! completeness but is misleading under class imbalance — an all-negative
//! predictor scores high accuracy while recall and F1 collapse, which is
//! exactly the failure mode these metrics are meant to expose.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageBitmap;
use crate::smoothing::{encode, CoverageModel, PatternConfig};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MlEvalError {
    #[error("model has {model} outputs but labels have {labels} columns")]
    DimensionMismatch { model: usize, labels: usize },
    #[error("no holdout samples to evaluate")]
    Empty,
}

/// Metrics for a single edge column at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetric {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the edge has no positive holdout label, in which case it
    /// is excluded from the PR-AUC macro average.
    pub pr_auc: Option<f64>,
}

/// Macro averages over edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pr_auc: f64,
    /// Edges excluded from the PR-AUC average for lack of positives.
    pub pr_auc_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub per_edge: Vec<EdgeMetric>,
    pub macro_avg: MacroMetrics,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score a model on holdout rows at `threshold` (predict positive when the
/// probability is >= threshold). Precision, recall, and F1 are defined as 0
/// when their denominators are 0.
pub fn evaluate(
    model: &CoverageModel,
    inputs: &[&[u8]],
    labels: &[&[bool]],
    threshold: f64,
) -> Result<EdgeMetrics, MlEvalError> {
    if inputs.is_empty() {
        return Err(MlEvalError::Empty);
    }
    let num_edges = model.num_edges();
    for row in labels {
        if row.len() != num_edges {
            return Err(MlEvalError::DimensionMismatch {
                model: num_edges,
                labels: row.len(),
            });
        }
    }
    assert_eq!(inputs.len(), labels.len());

    let scores: Vec<Vec<f64>> = inputs
        .iter()
        .map(|input| model.forward(&encode(input, model.input_len())))
        .collect();
    metrics_from_scores(&scores, labels, threshold)
}

/// Metric computation over precomputed per-row scores.
pub fn metrics_from_scores(
    scores: &[Vec<f64>],
    labels: &[&[bool]],
    threshold: f64,
) -> Result<EdgeMetrics, MlEvalError> {
    let rows = scores.len();
    if rows == 0 {
        return Err(MlEvalError::Empty);
    }
    let num_edges = scores[0].len();
    let mut per_edge = Vec::with_capacity(num_edges);

    for e in 0..num_edges {
        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for r in 0..rows {
            let predicted = scores[r][e] >= threshold;
            match (predicted, labels[r][e]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let edge_scores: Vec<f64> = (0..rows).map(|r| scores[r][e]).collect();
        let edge_labels: Vec<bool> = (0..rows).map(|r| labels[r][e]).collect();
        per_edge.push(EdgeMetric {
            accuracy: ratio(tp + tn, rows),
            precision,
            recall,
            f1,
            pr_auc: pr_auc(&edge_scores, &edge_labels),
        });
    }

    let n = per_edge.len() as f64;
    let with_auc: Vec<f64> = per_edge.iter().filter_map(|m| m.pr_auc).collect();
    let macro_avg = MacroMetrics {
        accuracy: per_edge.iter().map(|m| m.accuracy).sum::<f64>() / n,
        precision: per_edge.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_edge.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: per_edge.iter().map(|m| m.f1).sum::<f64>() / n,
        pr_auc: if with_auc.is_empty() {
            0.0
        } else {
            with_auc.iter().sum::<f64>() / with_auc.len() as f64
        },
        pr_auc_excluded: per_edge.len() - with_auc.len(),
    };
    Ok(EdgeMetrics {
        per_edge,
        macro_avg,
    })
}

/// Area under the precision-recall curve for one edge, sweeping every
/// distinct score as a threshold (predict positive when score >= t) and
/// integrating precision over recall with the trapezoidal rule. The curve
/// is anchored at (recall 0, precision 1) by convention. Returns `None`
/// when there are no positive labels.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });

    let mut area = 0.0;
    let mut prev_recall = 0.0;
    let mut prev_precision = 1.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group: a threshold either admits all equal
        // scores or none of them.
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
        prev_recall = recall;
        prev_precision = precision;
    }
    Some(area)
}

/// Thresholded model predictions next to ground truth, one row per test
/// case and one column per bitmap column. The actual matrix is the bitmap
/// itself; the pair feeds the heatmap CSV export.
pub fn coverage_heatmaps(
    model: &CoverageModel,
    inputs: &[&[u8]],
    bitmap: &CoverageBitmap,
    threshold: f64,
) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
    assert_eq!(
        model.num_edges(),
        bitmap.num_columns(),
        "model was not trained on this bitmap's columns"
    );
    assert_eq!(inputs.len(), bitmap.num_rows());
    let predicted = inputs
        .iter()
        .map(|input| {
            model
                .forward(&encode(input, model.input_len()))
                .into_iter()
                .map(|p| p >= threshold)
                .collect()
        })
        .collect();
    let actual = bitmap.rows().to_vec();
    (predicted, actual)
}

/// Model-side estimate of per-edge reachability through mutations.
///
/// Cell (i, e) is true iff some mutation generated when targeting edge `e`
/// from test case `i` pushes the model's prediction for `e` over the
/// threshold while the unmutated prediction was below it. Nothing is run on
/// the target program; columns are exactly the model's bitmap columns, so
/// no never-covered edge can appear.
pub fn mutation_reachability(
    model: &CoverageModel,
    inputs: &[&[u8]],
    k: usize,
    config: &PatternConfig,
    threshold: f64,
    rng_seed: u64,
) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let num_edges = model.num_edges();
    let mut gain = Vec::with_capacity(inputs.len());
    for input in inputs {
        let base = model.forward(&encode(input, model.input_len()));
        let mut row = Vec::with_capacity(num_edges);
        for (e, &base_p) in base.iter().enumerate() {
            if base_p >= threshold {
                row.push(false); // already predicted covered: no gain
                continue;
            }
            let plan = crate::smoothing::plan_mutations(model, input, e, k, &mut rng, config)
                .expect("edge index is in range");
            let reached = plan.inputs.iter().any(|candidate| {
                model.forward(&encode(candidate, model.input_len()))[e] >= threshold
            });
            row.push(reached);
        }
        gain.push(row);
    }
    gain
}
