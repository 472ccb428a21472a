//! Training loop: Adam on mean per-edge binary cross-entropy with a cosine
//! learning-rate schedule that restarts every `restart_period` epochs.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageBitmap;
use crate::math;
use crate::mleval::{evaluate, EdgeMetrics};
use crate::smoothing::model::{encode, CoverageModel, SmoothingError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Fraction of test cases held out for metrics, never used for updates.
    pub holdout_fraction: f64,
    /// Cosine schedule restart period, in epochs.
    pub restart_period: usize,
    pub batch_size: usize,
    /// Hidden-layer width.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 50,
            holdout_fraction: 0.10,
            restart_period: 10,
            batch_size: 32,
            hidden: 4096,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: CoverageModel,
    /// Holdout metrics at the classification threshold 0.5.
    pub holdout_metrics: EdgeMetrics,
    /// Mean training-split loss after each epoch.
    pub train_loss: Vec<f64>,
    pub train_indices: Vec<usize>,
    pub holdout_indices: Vec<usize>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Learning rate at `epoch` under cosine decay with restarts.
fn cosine_lr(base: f64, epoch: usize, period: usize) -> f64 {
    let t = (epoch % period) as f64 / period as f64;
    base * 0.5 * (1.0 + math::cos(core::f64::consts::PI * t))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, self.t as f64);
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, self.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (math::sqrt(v_hat) + ADAM_EPS);
        }
    }
}

fn validate(config: &TrainConfig) -> Result<(), SmoothingError> {
    if config.learning_rate <= 0.0 {
        return Err(SmoothingError::InvalidConfig("learning_rate must be > 0"));
    }
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) {
        return Err(SmoothingError::InvalidConfig(
            "holdout_fraction must be in (0, 1)",
        ));
    }
    if config.epochs == 0 || config.batch_size == 0 || config.hidden == 0 {
        return Err(SmoothingError::InvalidConfig(
            "epochs, batch_size and hidden must be positive",
        ));
    }
    if config.restart_period == 0 {
        return Err(SmoothingError::InvalidConfig("restart_period must be > 0"));
    }
    Ok(())
}

/// Fit a [`CoverageModel`] to `bitmap`, whose rows align with `inputs`.
///
/// The model input length is fixed to the longest input. A seeded shuffle
/// sets aside `holdout_fraction` of the rows (at least one on each side);
/// the holdout is only ever used for the returned metrics.
pub fn train(
    bitmap: &CoverageBitmap,
    inputs: &[&[u8]],
    config: &TrainConfig,
) -> Result<TrainOutcome, SmoothingError> {
    validate(config)?;
    let n = inputs.len();
    assert_eq!(n, bitmap.num_rows(), "bitmap rows must align with inputs");
    if n < 2 {
        return Err(SmoothingError::InsufficientData { needed: 2, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input_len = inputs.iter().map(|i| i.len()).max().unwrap_or(1).max(1);
    let num_edges = bitmap.num_columns();

    // Holdout split: seeded shuffle, holdout share clamped so both sides
    // stay non-empty.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let holdout_len = (math::round(n as f64 * config.holdout_fraction) as usize).clamp(1, n - 1);
    let holdout_indices: Vec<usize> = order[..holdout_len].to_vec();
    let train_indices: Vec<usize> = order[holdout_len..].to_vec();

    let encoded: Vec<Vec<f64>> = inputs.iter().map(|i| encode(i, input_len)).collect();

    // Xavier-uniform init.
    let mut model = CoverageModel::zeros(input_len, config.hidden, num_edges);
    let limit1 = math::sqrt(6.0 / (input_len + config.hidden) as f64);
    for w in model.w1.iter_mut() {
        *w = rng.gen_range(-limit1..limit1);
    }
    let limit2 = math::sqrt(6.0 / (config.hidden + num_edges) as f64);
    for w in model.w2.iter_mut() {
        *w = rng.gen_range(-limit2..limit2);
    }

    let mut adam_w1 = Adam::new(model.w1.len());
    let mut adam_b1 = Adam::new(model.b1.len());
    let mut adam_w2 = Adam::new(model.w2.len());
    let mut adam_b2 = Adam::new(model.b2.len());

    let mut gw1 = vec![0.0; model.w1.len()];
    let mut gb1 = vec![0.0; model.b1.len()];
    let mut gw2 = vec![0.0; model.w2.len()];
    let mut gb2 = vec![0.0; model.b2.len()];

    let mut shuffled = train_indices.clone();
    let mut train_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = cosine_lr(config.learning_rate, epoch, config.restart_period);
        shuffled.shuffle(&mut rng);

        for batch in shuffled.chunks(config.batch_size) {
            gw1.iter_mut().for_each(|g| *g = 0.0);
            gb1.iter_mut().for_each(|g| *g = 0.0);
            gw2.iter_mut().for_each(|g| *g = 0.0);
            gb2.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (batch.len() * num_edges) as f64;

            for &row in batch {
                let x = &encoded[row];
                let labels = bitmap.row(row);
                let z1 = model.hidden_pre(x);
                let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
                let mut z2 = model.b2.clone();
                for (h, &ah) in a1.iter().enumerate() {
                    if ah == 0.0 {
                        continue;
                    }
                    let row2 = &model.w2[h * num_edges..(h + 1) * num_edges];
                    for (e, &w) in row2.iter().enumerate() {
                        z2[e] += ah * w;
                    }
                }

                // d(mean BCE)/d z2_e = (sigmoid(z2_e) - y_e) * scale
                let dz2: Vec<f64> = z2
                    .iter()
                    .zip(labels)
                    .map(|(&z, &y)| (math::sigmoid(z) - if y { 1.0 } else { 0.0 }) * scale)
                    .collect();

                for (e, &d) in dz2.iter().enumerate() {
                    gb2[e] += d;
                }
                let mut da1 = vec![0.0; model.hidden];
                for (h, &ah) in a1.iter().enumerate() {
                    let row2 = &model.w2[h * num_edges..(h + 1) * num_edges];
                    if ah > 0.0 {
                        for (e, &d) in dz2.iter().enumerate() {
                            gw2[h * num_edges + e] += ah * d;
                        }
                    }
                    da1[h] = row2.iter().zip(&dz2).map(|(&w, &d)| w * d).sum();
                }
                for (h, &zh) in z1.iter().enumerate() {
                    if zh <= 0.0 {
                        continue;
                    }
                    let d = da1[h];
                    gb1[h] += d;
                    for (i, &xi) in x.iter().enumerate() {
                        if xi != 0.0 {
                            gw1[i * model.hidden + h] += xi * d;
                        }
                    }
                }
            }

            adam_w1.step(&mut model.w1, &gw1, lr);
            adam_b1.step(&mut model.b1, &gb1, lr);
            adam_w2.step(&mut model.w2, &gw2, lr);
            adam_b2.step(&mut model.b2, &gb2, lr);
        }

        train_loss.push(mean_bce(&model, &encoded, bitmap, &train_indices));
    }

    let holdout_inputs: Vec<&[u8]> = holdout_indices.iter().map(|&i| inputs[i]).collect();
    let holdout_labels: Vec<&[bool]> = holdout_indices.iter().map(|&i| bitmap.row(i)).collect();
    let holdout_metrics = evaluate(&model, &holdout_inputs, &holdout_labels, 0.5)
        .expect("holdout labels align with the model by construction");

    Ok(TrainOutcome {
        model,
        holdout_metrics,
        train_loss,
        train_indices,
        holdout_indices,
    })
}

/// Mean binary cross-entropy over the given rows, computed from logits for
/// numerical stability.
fn mean_bce(
    model: &CoverageModel,
    encoded: &[Vec<f64>],
    bitmap: &CoverageBitmap,
    rows: &[usize],
) -> f64 {
    let mut total = 0.0;
    for &row in rows {
        let logits = model.logits(&encoded[row]);
        for (&z, &y) in logits.iter().zip(bitmap.row(row)) {
            // BCE(z, y) = ln(1 + exp(z)) - y * z
            total += math::ln_1p_exp(z) - if y { z } else { 0.0 };
        }
    }
    total / (rows.len() * bitmap.num_columns()) as f64
}
