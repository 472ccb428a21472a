//! The coverage-prediction network and its input encoding.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::target::EdgeId;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SmoothingError {
    #[error("targeted edge column {edge} out of range (model has {num_edges} outputs)")]
    EdgeOutOfRange { edge: usize, num_edges: usize },
    #[error("need at least {needed} test cases, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unsupported model checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed model checkpoint: {0}")]
    MalformedCheckpoint(&'static str),
}

/// Map input bytes to `[0, 1]` reals: value / 255, zero-padded or truncated
/// to `input_len`.
pub fn encode(input: &[u8], input_len: usize) -> Vec<f64> {
    let mut x = vec![0.0; input_len];
    for (i, &b) in input.iter().take(input_len).enumerate() {
        x[i] = b as f64 / 255.0;
    }
    x
}

/// Inverse of [`encode`] for in-range values: round back to bytes.
pub fn decode(encoded: &[f64]) -> Vec<u8> {
    encoded
        .iter()
        .map(|&v| math::round(v.clamp(0.0, 1.0) * 255.0) as u8)
        .collect()
}

/// Dense one-hidden-layer network predicting per-edge coverage probability
/// from a normalized input. Hidden activation is ReLU, outputs are sigmoid,
/// one per reduced-bitmap column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageModel {
    pub(crate) input_len: usize,
    pub(crate) hidden: usize,
    pub(crate) num_edges: usize,
    /// input_len x hidden, row-major.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// hidden x num_edges, row-major.
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

impl CoverageModel {
    pub fn zeros(input_len: usize, hidden: usize, num_edges: usize) -> Self {
        Self {
            input_len,
            hidden,
            num_edges,
            w1: vec![0.0; input_len * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * num_edges],
            b2: vec![0.0; num_edges],
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Number of edge columns the model can address.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Pre-activation of the hidden layer: `x . W1 + b1`.
    pub(crate) fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_len);
        let mut z1 = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            for (h, &w) in row.iter().enumerate() {
                z1[h] += xi * w;
            }
        }
        z1
    }

    /// Pre-sigmoid output scores for all edge columns.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let z1 = self.hidden_pre(x);
        let mut z2 = self.b2.clone();
        for (h, &zh) in z1.iter().enumerate() {
            if zh <= 0.0 {
                continue; // ReLU
            }
            let row = &self.w2[h * self.num_edges..(h + 1) * self.num_edges];
            for (e, &w) in row.iter().enumerate() {
                z2[e] += zh * w;
            }
        }
        z2
    }

    /// Per-edge coverage probabilities.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x).into_iter().map(math::sigmoid).collect()
    }

    /// Exact gradient of the targeted edge's pre-sigmoid logit with respect
    /// to each encoded input component.
    ///
    /// The logit is used instead of the probability so the gradient does not
    /// vanish when the sigmoid saturates; the two choices rank |gradient|
    /// identically because they differ by a positive per-input scalar.
    /// ReLU uses subgradient 0 at exactly 0.
    pub fn input_gradient(&self, x: &[f64], edge: usize) -> Result<Vec<f64>, SmoothingError> {
        if edge >= self.num_edges {
            return Err(SmoothingError::EdgeOutOfRange {
                edge,
                num_edges: self.num_edges,
            });
        }
        let z1 = self.hidden_pre(x);
        // d logit_e / d x_i = sum_h [z1_h > 0] * W1[i,h] * W2[h,e]
        let mut hidden_grad = vec![0.0; self.hidden];
        for (h, &zh) in z1.iter().enumerate() {
            if zh > 0.0 {
                hidden_grad[h] = self.w2[h * self.num_edges + edge];
            }
        }
        let mut grad = vec![0.0; self.input_len];
        for (i, g) in grad.iter_mut().enumerate() {
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            *g = row.iter().zip(&hidden_grad).map(|(w, hg)| w * hg).sum();
        }
        Ok(grad)
    }
}

pub const MODEL_CHECKPOINT_VERSION: u32 = 1;

/// Serializable model snapshot, including the bitmap column -> edge-id
/// mapping it was trained against. The format is versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub input_len: usize,
    pub hidden: usize,
    /// Column index -> original edge ids (merged columns carry several).
    pub columns: Vec<Vec<EdgeId>>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ModelCheckpoint {
    pub fn from_model(model: &CoverageModel, columns: &[BTreeSet<EdgeId>]) -> Self {
        debug_assert_eq!(columns.len(), model.num_edges);
        Self {
            version: MODEL_CHECKPOINT_VERSION,
            input_len: model.input_len,
            hidden: model.hidden,
            columns: columns.iter().map(|s| s.iter().copied().collect()).collect(),
            w1: model.w1.clone(),
            b1: model.b1.clone(),
            w2: model.w2.clone(),
            b2: model.b2.clone(),
        }
    }

    /// Validate and convert back into a usable model plus column mapping.
    pub fn into_model(self) -> Result<(CoverageModel, Vec<BTreeSet<EdgeId>>), SmoothingError> {
        if self.version != MODEL_CHECKPOINT_VERSION {
            return Err(SmoothingError::UnsupportedVersion(self.version));
        }
        let num_edges = self.columns.len();
        if self.w1.len() != self.input_len * self.hidden
            || self.b1.len() != self.hidden
            || self.w2.len() != self.hidden * num_edges
            || self.b2.len() != num_edges
        {
            return Err(SmoothingError::MalformedCheckpoint("weight shape mismatch"));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        Ok((
            CoverageModel {
                input_len: self.input_len,
                hidden: self.hidden,
                num_edges,
                w1: self.w1,
                b1: self.b1,
                w2: self.w2,
                b2: self.b2,
            },
            columns,
        ))
    }
}
