//! `run.json`: what a subcommand read and wrote, with SHA-256 digests.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "run.json";

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Digest of a file, or of `manifest.json` for a corpus directory.
fn entry(path: &Path, display: String) -> Result<FileEntry> {
    let target = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    Ok(FileEntry { path: display, sha256: digest_file(&target)? })
}

pub struct Run {
    pub dir: PathBuf,
    command: &'static str,
    inputs: Vec<FileEntry>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(dir: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating run directory {}", dir.display()))?;
        Ok(Run { dir: dir.to_path_buf(), command, inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(entry(path, path.display().to_string())?);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `bytes` to `name` inside the run directory.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    /// Notes a file written into the run directory by other means.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn finish(self, config: &RunConfig) -> Result<()> {
        let outputs =
            self.outputs.iter().map(|name| entry(&self.dir.join(name), name.clone())).collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config,
            inputs: self.inputs,
            outputs,
        };
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))
    }
}
