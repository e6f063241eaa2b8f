//! Run manifests: enough provenance to reproduce any command exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use gridcast_core::error::{Error, Result};

#[derive(Debug, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    pub timestamp_utc: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config_path: None,
            seed: None,
            seeds: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp_utc: chrono::Utc::now().to_rfc3339(),
            wall_time_s: None,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(file_ref(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(file_ref(path)?);
        Ok(())
    }

    /// Hashes every regular file directly inside `dir`.
    pub fn add_input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for p in paths {
            self.add_input(&p)?;
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::State(format!("manifest serialization failed: {e}")))?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }
}

fn file_ref(path: &Path) -> Result<FileRef> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: hex,
    })
}
