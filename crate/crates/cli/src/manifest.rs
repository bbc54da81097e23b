//! Per-run manifest: what ran, with which inputs, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Config,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_secs: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects inputs and outputs while a command runs.
pub struct RunRecorder {
    out_dir: PathBuf,
    command: String,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Path of an output file inside the run directory, registered for digesting.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.output(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn finish(self, config: &Config) -> Result<RunManifest, CliError> {
        let digest = |paths: &[PathBuf], rel: bool| -> Result<Vec<FileDigest>, CliError> {
            paths
                .iter()
                .map(|p| {
                    let name = if rel {
                        p.strip_prefix(&self.out_dir).unwrap_or(p).display().to_string()
                    } else {
                        p.display().to_string()
                    };
                    Ok(FileDigest {
                        path: name,
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            config: config.clone(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: digest(&self.inputs, false)?,
            outputs: digest(&self.outputs, true)?,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
