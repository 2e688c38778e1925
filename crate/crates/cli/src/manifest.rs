use std::fs;
use std::path::{Path, PathBuf};

use igcf::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Git object hash in SHA-256 object format: `sha256("blob <len>\0" ‖ data)`.
pub fn blob_hash(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", data.len()).as_bytes());
    h.update(data);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    /// `complete`, or `partial` when the run failed after writing some files.
    pub status: String,
    pub error: Option<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

/// Collects the files a command writes so the manifest can list them.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.written.push(FileEntry {
            path: name.to_string(),
            hash: blob_hash(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| igcf::Error::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json`; `outcome` is the command's result.
    pub fn finish(mut self, command: &str, config: &RunConfig, outcome: &Result<()>) -> Result<()> {
        let inputs = config
            .input_paths()
            .iter()
            .filter_map(|p| {
                fs::read(p).ok().map(|bytes| FileEntry {
                    path: p.display().to_string(),
                    hash: blob_hash(&bytes),
                })
            })
            .collect();
        let manifest = Manifest {
            command: command.to_string(),
            status: if outcome.is_ok() { "complete" } else { "partial" }.to_string(),
            error: outcome.as_ref().err().map(|e| e.to_string()),
            seed: config.seed,
            config: config.clone(),
            inputs,
            outputs: std::mem::take(&mut self.written),
        };
        self.write_json("manifest.json", &manifest)
    }
}
