//! Run manifests: every subcommand records its resolved configuration,
//! input digests, and output digests beside its outputs, so identical
//! inputs and config are checkable against identical output digests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub wall_time_micros: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn output_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path)?;
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn output_bytes(&mut self, label: &str, bytes: &[u8]) {
        self.outputs.push(FileDigest {
            path: label.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write(self, path: &Path) -> anyhow::Result<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_micros: self.started.elapsed().as_micros() as u64,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(path, json)?;
        Ok(())
    }
}

/// Default manifest location: beside the primary output file, or the
/// working directory when output goes to standard output.
pub fn default_manifest_path(out: Option<&Path>) -> PathBuf {
    match out {
        Some(out) => {
            let name = out
                .file_name()
                .map(|n| format!("{}.manifest.json", n.to_string_lossy()))
                .unwrap_or_else(|| "run.manifest.json".into());
            out.with_file_name(name)
        }
        None => PathBuf::from("chunkdedup.manifest.json"),
    }
}
