//! Audit record written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub counts: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_trace: Option<Vec<f64>>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: Option<String>, seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config_hash,
            seed,
            counts: BTreeMap::new(),
            k_trace: None,
            outputs: Vec::new(),
        }
    }

    pub fn count(&mut self, key: &str, value: impl Into<serde_json::Value>) -> &mut Self {
        self.counts.insert(key.to_owned(), value.into());
        self
    }

    /// Records `files` (relative to `out_dir`) with their digests and writes
    /// `<command>.manifest.json`.
    pub fn write(&mut self, out_dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        for f in files {
            let bytes = std::fs::read(f)?;
            let rel = f.strip_prefix(out_dir).unwrap_or(f);
            self.outputs.push(OutputFile {
                path: rel.to_string_lossy().into_owned(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let path = out_dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
