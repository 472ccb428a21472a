//! Hot-byte ranking and the four gradient-guided mutation patterns:
//! stepped increments to 255, stepped decrements to 0, one random chunk
//! insertion, and one random chunk deletion per hot byte.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::smoothing::model::{encode, CoverageModel, SmoothingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientSign {
    Positive,
    Negative,
}

/// Top-`k` byte offsets by absolute gradient, descending, ties broken by
/// ascending offset. Zero entries are excluded; an all-zero gradient yields
/// an empty list and the caller skips mutation.
pub fn rank_bytes(gradient: &[f64], k: usize) -> Vec<(usize, GradientSign)> {
    let mut ranked: Vec<(usize, f64)> = gradient
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, g)| g != 0.0)
        .collect();
    ranked.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .expect("gradients are finite")
            .then(a.0.cmp(&b.0))
    });
    ranked
        .into_iter()
        .take(k)
        .map(|(offset, g)| {
            let sign = if g > 0.0 {
                GradientSign::Positive
            } else {
                GradientSign::Negative
            };
            (offset, sign)
        })
        .collect()
}

/// Mutation pattern parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// Step offsets for the increment/decrement patterns, ascending. The
    /// saturation endpoint (255 or 0) is always appended if not reached.
    pub steps: Vec<u8>,
    /// Maximum random chunk length for insert/delete.
    pub chunk_max: usize,
    /// Hard cap on generated input length.
    pub max_input_len: usize,
}

impl PatternConfig {
    /// Exponentially growing steps 1, 2, 4, ..., 128 and a 32-byte chunk cap.
    pub fn new(max_input_len: usize) -> Self {
        Self {
            steps: vec![1, 2, 4, 8, 16, 32, 64, 128],
            chunk_max: 32,
            max_input_len,
        }
    }
}

/// A ranked mutation batch for one (seed, targeted edge column) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationPlan {
    pub seed: Vec<u8>,
    /// Reduced-bitmap column this plan tries to flip.
    pub targeted_column: usize,
    pub hot_bytes: Vec<(usize, GradientSign)>,
    pub inputs: Vec<Vec<u8>>,
}

fn byte_walk(from: u8, up: bool, steps: &[u8]) -> Vec<u8> {
    let bound = if up { 255 } else { 0 };
    let mut values = Vec::new();
    for &step in steps {
        let v = if up {
            from.saturating_add(step)
        } else {
            from.saturating_sub(step)
        };
        if v == from || values.last() == Some(&v) {
            continue;
        }
        values.push(v);
        if v == bound {
            break;
        }
    }
    if from != bound && values.last() != Some(&bound) {
        values.push(bound);
    }
    values
}

/// Expand the four pattern families for every hot byte.
///
/// In-place patterns are skipped for offsets past the end of the seed
/// (model padding); insertion clamps the offset to the seed length. The
/// gradient sign picks which in-place direction is emitted first. Generated
/// inputs always have length in `[1, max_input_len]`.
pub fn mutate(
    seed: &[u8],
    hot_bytes: &[(usize, GradientSign)],
    rng: &mut dyn RngCore,
    config: &PatternConfig,
) -> Vec<Vec<u8>> {
    assert!(!seed.is_empty(), "mutation seeds are never empty");
    let mut out = Vec::new();

    for &(offset, sign) in hot_bytes {
        if offset < seed.len() {
            let original = seed[offset];
            let emit_walk = |up: bool, out: &mut Vec<Vec<u8>>| {
                for v in byte_walk(original, up, &config.steps) {
                    let mut candidate = seed.to_vec();
                    candidate[offset] = v;
                    out.push(candidate);
                }
            };
            match sign {
                GradientSign::Positive => {
                    emit_walk(true, &mut out);
                    emit_walk(false, &mut out);
                }
                GradientSign::Negative => {
                    emit_walk(false, &mut out);
                    emit_walk(true, &mut out);
                }
            }
        }

        // One insertion of a random chunk at the (clamped) offset.
        let insert_at = offset.min(seed.len());
        let chunk_len = rng.gen_range(1..=config.chunk_max);
        let mut inserted = Vec::with_capacity(seed.len() + chunk_len);
        inserted.extend_from_slice(&seed[..insert_at]);
        inserted.extend((0..chunk_len).map(|_| rng.gen::<u8>()));
        inserted.extend_from_slice(&seed[insert_at..]);
        inserted.truncate(config.max_input_len);
        out.push(inserted);

        // One deletion of a random-length chunk starting at the offset,
        // skipped when it would empty the input or start past the end.
        if offset < seed.len() {
            let want = rng.gen_range(1..=config.chunk_max);
            let del = want.min(seed.len() - offset);
            if del < seed.len() {
                let mut deleted = Vec::with_capacity(seed.len() - del);
                deleted.extend_from_slice(&seed[..offset]);
                deleted.extend_from_slice(&seed[offset + del..]);
                out.push(deleted);
            }
        }
    }
    out
}

/// Compute the gradient for `targeted_column` on `seed`, rank hot bytes
/// (capped at `k`), and expand the mutation patterns.
pub fn plan_mutations(
    model: &CoverageModel,
    seed: &[u8],
    targeted_column: usize,
    k: usize,
    rng: &mut dyn RngCore,
    config: &PatternConfig,
) -> Result<MutationPlan, SmoothingError> {
    let x = encode(seed, model.input_len());
    let gradient = model.input_gradient(&x, targeted_column)?;
    let hot_bytes = rank_bytes(&gradient, k);
    let inputs = if hot_bytes.is_empty() {
        Vec::new()
    } else {
        mutate(seed, &hot_bytes, rng, config)
    };
    Ok(MutationPlan {
        seed: seed.to_vec(),
        targeted_column,
        hot_bytes,
        inputs,
    })
}
