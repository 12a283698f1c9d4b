//! Run manifests and atomic artifact writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything that determines a run's outputs, plus what it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<InputFile>,
    pub parameters: Value,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub tool_version: String,
    /// SHA-256 over subcommand, input digests, parameters, seed and version.
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(subcommand: &str, inputs: &[(PathBuf, Vec<u8>)], parameters: Value, seed: u64, output_dir: Option<PathBuf>) -> Self {
        let inputs: Vec<InputFile> = inputs
            .iter()
            .map(|(path, bytes)| InputFile {
                path: path.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect();
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        // Paths are left out so a moved input hashes the same.
        let digests: Vec<&str> = inputs.iter().map(|i| i.sha256.as_str()).collect();
        let key = serde_json::json!({
            "subcommand": subcommand,
            "inputs": digests,
            "parameters": parameters,
            "seed": seed,
            "version": tool_version,
        });
        Self {
            subcommand: subcommand.into(),
            config_hash: sha256_hex(key.to_string().as_bytes()),
            inputs,
            parameters,
            seed,
            output_dir,
            tool_version,
            artifacts: Vec::new(),
        }
    }

    /// Writes `bytes` atomically and records the artifact.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.artifacts.push(Artifact {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

/// Writes to a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads an input file, keeping its bytes for the manifest.
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}
