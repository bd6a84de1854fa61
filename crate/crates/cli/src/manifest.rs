//! Run manifests: the exact arguments of a run plus a hash of every output.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    /// False for files holding wall-clock timings.
    pub deterministic: bool,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: &'a [String],
    pub config: &'a C,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Writes `out_dir/manifest.json` listing `outputs` relative to `out_dir`.
pub fn write_manifest<C: Serialize>(
    out_dir: &Path,
    command: &'static str,
    argv: &[String],
    config: &C,
    outputs: &[(PathBuf, bool)],
) -> CliResult<()> {
    let mut entries = Vec::with_capacity(outputs.len());
    for (path, deterministic) in outputs {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        entries.push(OutputEntry {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_file(path)?,
            deterministic: *deterministic,
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv,
        config,
        outputs: entries,
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
