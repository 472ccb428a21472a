//! The JSON campaign configuration file.
//!
//! Seeds may be given as text, hex, explicit byte arrays, or a seeded
//! random block; they are expanded to concrete byte strings before the core
//! config is built, so the stored `campaign.json` always carries the exact
//! corpus a run used.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smoothfuzz_core::bench::CampaignConfig;
use smoothfuzz_core::engine::{FuzzConfig, MutatorMix};

/// Environment variable naming the root directory for outputs. Relative
/// `--out` paths are resolved against it.
pub const OUT_ROOT_ENV: &str = "SMOOTHFUZZ_OUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignFile {
    pub target: String,
    pub variants: Vec<MutatorMix>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub base_seed: u64,
    pub budget: u64,
    #[serde(default)]
    pub overhead_per_exec: u64,
    /// Scales the retrain interval so desk-scale budgets still retrain;
    /// applied to `fuzz.retrain.min_interval`.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    pub seeds: Vec<SeedSpec>,
    #[serde(default)]
    pub fuzz: FuzzConfig,
}

fn default_trials() -> u32 {
    30
}

fn default_time_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSpec {
    /// Literal UTF-8 bytes: `{"text": "FUZZ"}`.
    Text(String),
    /// Hex string: `{"hex": "46555a5a"}`.
    Hex(String),
    /// Explicit byte values: `{"bytes": [0, 13, 26]}`.
    Bytes(Vec<u8>),
    /// `count` uniformly random inputs of `len` bytes from a seeded
    /// generator: `{"random": {"count": 200, "len": 32, "seed": 1}}`.
    Random { count: usize, len: usize, seed: u64 },
}

fn decode_hex(s: &str) -> Result<Vec<u8>> {
    let s = s.trim();
    if !s.len().is_multiple_of(2) {
        bail!("hex seed has odd length");
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .with_context(|| format!("bad hex byte in seed at offset {}", 2 * i))
        })
        .collect()
}

impl SeedSpec {
    fn expand(&self) -> Result<Vec<Vec<u8>>> {
        Ok(match self {
            SeedSpec::Text(text) => vec![text.as_bytes().to_vec()],
            SeedSpec::Hex(hex) => vec![decode_hex(hex)?],
            SeedSpec::Bytes(bytes) => vec![bytes.clone()],
            SeedSpec::Random { count, len, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| {
                        let mut buf = vec![0u8; (*len).max(1)];
                        rng.fill_bytes(&mut buf);
                        buf
                    })
                    .collect()
            }
        })
    }
}

impl CampaignFile {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("reading campaign config {}", path.display()))?;
        serde_json::from_str(&raw)
            .with_context(|| format!("parsing campaign config {}", path.display()))
    }

    /// Expand seeds and apply the time scale, producing the core config.
    pub fn resolve(&self) -> Result<CampaignConfig> {
        let mut seeds = Vec::new();
        for spec in &self.seeds {
            seeds.extend(spec.expand()?);
        }
        if !self.time_scale.is_finite() || self.time_scale <= 0.0 {
            bail!("time_scale must be positive");
        }
        let mut fuzz = self.fuzz.clone();
        fuzz.retrain.min_interval =
            (fuzz.retrain.min_interval as f64 * self.time_scale).round() as u64;
        Ok(CampaignConfig {
            target: self.target.clone(),
            variants: self.variants.clone(),
            trials: self.trials,
            base_seed: self.base_seed,
            budget: self.budget,
            overhead_per_exec: self.overhead_per_exec,
            seeds,
            fuzz,
        })
    }
}

/// Resolve the output directory from the CLI flag and the `SMOOTHFUZZ_OUT`
/// environment variable.
pub fn resolve_out_dir(flag: Option<PathBuf>, default_name: &str) -> PathBuf {
    let root = env::var_os(OUT_ROOT_ENV).map(PathBuf::from);
    match (root, flag) {
        (Some(root), Some(out)) if out.is_relative() => root.join(out),
        (_, Some(out)) => out,
        (Some(root), None) => root.join(default_name),
        (None, None) => PathBuf::from(default_name),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_config() {
        let raw = r#"{
            "target": "branch_ladder",
            "variants": ["havoc", "nps_havoc"],
            "budget": 5000,
            "seeds": [
                {"text": "FUZZ"},
                {"hex": "00ff10"},
                {"bytes": [1, 2, 3]},
                {"random": {"count": 2, "len": 4, "seed": 9}}
            ]
        }"#;
        let file: CampaignFile = serde_json::from_str(raw).unwrap();
        let config = file.resolve().unwrap();
        assert_eq!(config.trials, 30);
        assert_eq!(config.seeds.len(), 5);
        assert_eq!(config.seeds[0], b"FUZZ".to_vec());
        assert_eq!(config.seeds[1], vec![0x00, 0xff, 0x10]);
        assert_eq!(config.seeds[2], vec![1, 2, 3]);
        assert_eq!(config.seeds[3].len(), 4);
        // Random seeds are reproducible.
        let again = file.resolve().unwrap();
        assert_eq!(config.seeds, again.seeds);
    }

    #[test]
    fn time_scale_scales_the_retrain_interval() {
        let raw = r#"{
            "target": "magic_chain",
            "variants": ["nps"],
            "budget": 100,
            "time_scale": 0.01,
            "seeds": [{"text": "A"}]
        }"#;
        let file: CampaignFile = serde_json::from_str(raw).unwrap();
        let config = file.resolve().unwrap();
        assert_eq!(config.fuzz.retrain.min_interval, 36);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let raw = r#"{"target": "x", "variants": [], "budget": 1, "seeds": [], "typo": 1}"#;
        assert!(serde_json::from_str::<CampaignFile>(raw).is_err());
    }

    #[test]
    fn bad_hex_is_rejected() {
        assert!(decode_hex("0").is_err());
        assert!(decode_hex("zz").is_err());
        assert_eq!(decode_hex("a00f").unwrap(), vec![0xa0, 0x0f]);
    }
}
