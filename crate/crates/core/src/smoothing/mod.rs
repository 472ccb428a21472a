//! Neural program smoothing: a dense coverage-prediction model, its
//! training loop, input gradients, and the gradient-guided byte mutations.
//!
//! The model is a single-hidden-layer perceptron mapping normalized input
//! bytes to one sigmoid output per reduced-bitmap column. Because the
//! bitmap only contains edges the corpus has already covered, the set of
//! edges the model can target is exactly the covered set — mutations can
//! reach new edges only incidentally.

mod model;
mod mutate;
mod policy;
mod train;

pub use model::{
    decode, encode, CoverageModel, ModelCheckpoint, SmoothingError, MODEL_CHECKPOINT_VERSION,
};
pub use mutate::{mutate, plan_mutations, rank_bytes, GradientSign, MutationPlan, PatternConfig};
pub use policy::{select_target_edges, should_retrain, RetrainPolicy, RetrainState};
pub use train::{train, TrainConfig, TrainOutcome};
