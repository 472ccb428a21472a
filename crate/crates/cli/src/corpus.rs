//! On-disk corpus layout: one file per entry, named `{id}_{source}_{parent}`
//! (zero-padded ids, `none` for seed entries), containing the raw input
//! bytes. Reads are sorted by file name so replay order is stable.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use smoothfuzz_core::engine::{CorpusEntry, TrialReport};

pub fn entry_file_name(entry: &CorpusEntry) -> String {
    let parent = match entry.parent {
        Some(p) => format!("{p:06}"),
        None => "none".to_string(),
    };
    format!("{:06}_{}_{}", entry.id, entry.source.as_str(), parent)
}

/// Write every corpus entry of a trial into `dir`.
pub fn write_corpus(dir: &Path, report: &TrialReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    for entry in &report.corpus {
        let path = dir.join(entry_file_name(entry));
        fs::write(&path, &entry.input)
            .with_context(|| format!("writing corpus entry {}", path.display()))?;
    }
    Ok(())
}

/// Read all regular files in `dir` as test cases, sorted by file name.
pub fn read_corpus(dir: &Path) -> Result<Vec<Vec<u8>>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading corpus {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push(entry.path());
        }
    }
    names.sort();
    names
        .into_iter()
        .map(|path| fs::read(&path).with_context(|| format!("reading {}", path.display())))
        .collect()
}
