//! `manifest.json`: one entry per stage, keyed by stage name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub config: RunConfig,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of every file read, keyed by display path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written.
    pub outputs: BTreeMap<String, String>,
    /// Stage-specific facts, such as a synthetic set's ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hashes every path that exists; directories contribute each file inside.
pub fn checksums(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.sort();
            for f in files.into_iter().filter(|f| f.is_file()) {
                out.insert(f.display().to_string(), sha256_file(&f)?);
            }
        } else if p.is_file() {
            out.insert(p.display().to_string(), sha256_file(p)?);
        }
    }
    Ok(out)
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("typofill".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("manifest_format".to_string(), "1".to_string()),
    ])
}

/// Records `stage` in `dir/manifest.json`, keeping other stages' entries.
pub fn record(
    dir: &Path,
    stage: &str,
    config: &RunConfig,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    detail: Option<serde_json::Value>,
) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut manifest = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
            log::warn!("{}: unreadable manifest replaced ({e})", path.display());
            Manifest::default()
        }),
        Err(_) => Manifest::default(),
    };
    manifest.stages.insert(
        stage.to_string(),
        StageEntry {
            config: config.clone(),
            seed: config.seed,
            versions: versions(),
            inputs: checksums(inputs)?,
            outputs: checksums(outputs)?,
            detail,
        },
    );
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
