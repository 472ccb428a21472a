//! In-process execution targets with edge coverage and crash signals.
//!
//! Targets stand in for instrumented binaries: they are pure functions from
//! input bytes to an [`ExecResult`]. Edge 0 is the entry edge and is hit by
//! every execution. Crashes are reported as data (an abort-site signature),
//! never as errors.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Identifier of a control-flow edge in a target.
pub type EdgeId = u32;

/// Ordered list of abort-site ids identifying one crash location.
///
/// Two inputs trigger the same bug exactly when their signatures are equal
/// as lists (no prefix matching).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CrashSignature {
    pub frames: Vec<u32>,
}

/// Outcome of one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    /// Edges traversed by this input. Always contains the entry edge 0.
    pub edges_hit: BTreeSet<EdgeId>,
    /// Abort signature when the input crashed the target.
    pub crash: Option<CrashSignature>,
    /// Abstract cost of the execution in virtual-time units, at least 1.
    pub exec_cost: u64,
}

/// Static description of a target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub num_edges: u32,
    pub max_input_len: usize,
}

/// An in-process instrumented program.
///
/// Implementations must be deterministic: the same input always produces the
/// same [`ExecResult`]. Targets are stateless and safe to share between
/// concurrently running trials.
pub trait Target: Sync {
    fn spec(&self) -> &TargetSpec;

    /// Execute `input`, which the caller has already clipped to
    /// `max_input_len`. Prefer [`execute`] over calling this directly.
    fn run(&self, input: &[u8]) -> ExecResult;
}

/// Execute `input` on `target`, truncating it to the target's maximum input
/// length first. Shorter inputs are processed as-is.
pub fn execute(target: &dyn Target, input: &[u8]) -> ExecResult {
    let spec = target.spec();
    let clipped = &input[..input.len().min(spec.max_input_len)];
    let result = target.run(clipped);
    debug_assert!(result.edges_hit.contains(&0), "entry edge must be hit");
    debug_assert!(result.edges_hit.iter().all(|&e| e < spec.num_edges));
    debug_assert!(result.exec_cost >= 1);
    result
}

const BUILTIN_MAX_INPUT_LEN: usize = 64;

/// Four edges behind nested guards: edge 1 needs the magic prefix `FUZZ`,
/// edge 2 additionally needs byte 4 = 0x42, edge 3 additionally needs
/// (byte5 + byte6) mod 256 = 0x99. Reaching edge 3 with byte 7 = 0xFF
/// aborts with signature `[3]`.
pub struct MagicChain {
    spec: TargetSpec,
}

impl MagicChain {
    pub fn new() -> Self {
        Self {
            spec: TargetSpec {
                name: "magic_chain".to_owned(),
                num_edges: 4,
                max_input_len: BUILTIN_MAX_INPUT_LEN,
            },
        }
    }
}

impl Default for MagicChain {
    fn default() -> Self {
        Self::new()
    }
}

impl Target for MagicChain {
    fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    fn run(&self, input: &[u8]) -> ExecResult {
        let mut edges = BTreeSet::new();
        edges.insert(0);
        let mut crash = None;
        if input.get(0..4) == Some(b"FUZZ".as_slice()) {
            edges.insert(1);
            if input.get(4) == Some(&0x42) {
                edges.insert(2);
                if let (Some(&a), Some(&b)) = (input.get(5), input.get(6)) {
                    if a.wrapping_add(b) == 0x99 {
                        edges.insert(3);
                        if input.get(7) == Some(&0xFF) {
                            crash = Some(CrashSignature { frames: vec![3] });
                        }
                    }
                }
            }
        }
        ExecResult {
            edges_hit: edges,
            crash,
            exec_cost: 1,
        }
    }
}

/// Sixteen independently guarded edges: edge `i + 1` is hit iff byte `i`
/// equals `(13 * i) mod 256`. Edge 0 is the entry edge.
pub struct BranchLadder {
    spec: TargetSpec,
}

/// Number of guarded rungs in [`BranchLadder`].
pub const BRANCH_LADDER_RUNGS: usize = 16;

impl BranchLadder {
    pub fn new() -> Self {
        Self {
            spec: TargetSpec {
                name: "branch_ladder".to_owned(),
                num_edges: BRANCH_LADDER_RUNGS as u32 + 1,
                max_input_len: BUILTIN_MAX_INPUT_LEN,
            },
        }
    }

    /// Byte value that opens rung `i` (hitting edge `i + 1`).
    pub fn rung_value(i: usize) -> u8 {
        ((13 * i) % 256) as u8
    }
}

impl Default for BranchLadder {
    fn default() -> Self {
        Self::new()
    }
}

impl Target for BranchLadder {
    fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    fn run(&self, input: &[u8]) -> ExecResult {
        let mut edges = BTreeSet::new();
        edges.insert(0);
        for i in 0..BRANCH_LADDER_RUNGS {
            if input.get(i) == Some(&Self::rung_value(i)) {
                edges.insert(i as EdgeId + 1);
            }
        }
        ExecResult {
            edges_hit: edges,
            crash: None,
            exec_cost: 1,
        }
    }
}

/// One deliberately rare edge: edge 1 is hit iff the byte sum of the input
/// is divisible by 251. Useful for class-imbalance studies.
pub struct ChecksumGuard {
    spec: TargetSpec,
}

impl ChecksumGuard {
    pub fn new() -> Self {
        Self {
            spec: TargetSpec {
                name: "checksum_guard".to_owned(),
                num_edges: 2,
                max_input_len: BUILTIN_MAX_INPUT_LEN,
            },
        }
    }
}

impl Default for ChecksumGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Target for ChecksumGuard {
    fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    fn run(&self, input: &[u8]) -> ExecResult {
        let mut edges = BTreeSet::new();
        edges.insert(0);
        let sum: u64 = input.iter().map(|&b| b as u64).sum();
        if sum.is_multiple_of(251) {
            edges.insert(1);
        }
        ExecResult {
            edges_hit: edges,
            crash: None,
            exec_cost: 1,
        }
    }
}

/// Specs of all built-in targets.
pub fn builtin_targets() -> Vec<TargetSpec> {
    vec![
        MagicChain::new().spec().clone(),
        BranchLadder::new().spec().clone(),
        ChecksumGuard::new().spec().clone(),
    ]
}

/// Name-indexed set of targets. Starts from the built-ins; user-defined
/// in-process targets are added with [`TargetRegistry::register`].
pub struct TargetRegistry {
    targets: BTreeMap<String, Box<dyn Target>>,
}

impl TargetRegistry {
    pub fn empty() -> Self {
        Self {
            targets: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(MagicChain::new()));
        reg.register(Box::new(BranchLadder::new()));
        reg.register(Box::new(ChecksumGuard::new()));
        reg
    }

    /// Register a target under its spec name, replacing any previous entry.
    pub fn register(&mut self, target: Box<dyn Target>) {
        self.targets.insert(target.spec().name.clone(), target);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Target> {
        self.targets.get(name).map(|t| t.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.targets.keys().map(|s| s.as_str())
    }
}
