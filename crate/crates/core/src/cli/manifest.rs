//! Output files with content digests and the run manifest that lists them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved config; feeding it back through `--config` replays the run.
    pub parameters: Value,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes files into one directory and records their digests.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.record(name.to_string(), bytes);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Records a file written elsewhere (e.g. by a nested run) under `path`.
    pub fn record(&mut self, path: String, bytes: &[u8]) {
        self.entries.push(OutputEntry { path, sha256: sha256_hex(bytes) });
    }

    pub fn extend(&mut self, prefix: &str, entries: Vec<OutputEntry>) {
        self.entries
            .extend(entries.into_iter().map(|e| OutputEntry { path: format!("{prefix}/{}", e.path), sha256: e.sha256 }));
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    /// Writes `manifest.json` (not itself listed) and returns the entries.
    pub fn finish(self, command: &str, parameters: Value, started: String) -> Result<Vec<OutputEntry>, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            parameters,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started,
            finished: now_rfc3339(),
            outputs: self.entries.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        write_atomic(&path, &bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.entries)
    }
}
