//! Desk-scale coverage-guided fuzzing with a learned coverage model.
//!
//! The crate is organized around one loop: execute test cases on an
//! instrumented in-process [`target`](crate::target), collect per-edge
//! coverage into a [`coverage`](crate::coverage) bitmap, fit a small dense
//! network to it ([`smoothing`](crate::smoothing)), and feed gradient-ranked
//! byte mutations back into the evolutionary [`engine`](crate::engine).
//! [`mleval`](crate::mleval) scores the model per edge, and
//! [`bench`](crate::bench) turns single trials into seeded multi-trial
//! campaigns with a common replay metric.
//!
//! Everything is deterministic given the configured RNG seeds; there are no
//! wall clocks, only virtual time accumulated from execution and training
//! costs. The crate itself is `no_std` (alloc required) so the algorithmic
//! core stays free of IO; file formats and the CLI live in the companion
//! `smoothfuzz-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bench;
pub mod coverage;
pub mod engine;
pub mod mleval;
pub mod smoothing;
pub mod target;

mod math;

pub use coverage::{CoverageBitmap, CoverageCache, TestId};
pub use engine::{run_trial, FuzzConfig, MutatorMix, TrialReport};
pub use target::{execute, CrashSignature, EdgeId, ExecResult, Target, TargetSpec};
