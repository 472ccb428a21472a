//! IO companion for `smoothfuzz-core`: the JSON campaign config file, CSV
//! and SVG report emission, the on-disk corpus layout, and a worker-pool
//! campaign runner. Everything here is deliberately deterministic so that
//! re-emitting reports from stored trial artifacts is byte-identical.

pub mod campaign;
pub mod config;
pub mod corpus;
pub mod formats;
pub mod svg;
