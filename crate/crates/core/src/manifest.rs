//! Run manifests and output-directory bookkeeping.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    pub fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::Skip, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub serial: bool,
    pub config: String,
    pub elapsed_seconds: f64,
    pub checks: Vec<Check>,
    /// Paths relative to the output directory, including the manifest.
    pub files: Vec<String>,
    pub error: Option<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects emitted files and checks for one subcommand run.
pub struct Run {
    pub dir: PathBuf,
    started: Instant,
    files: Vec<String>,
    pub checks: Vec<Check>,
}

impl Run {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), started: Instant::now(), files: Vec::new(), checks: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        self.write(name, text + "\n")
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(mut self, command: &str, seed: u64, serial: bool, config: String, error: Option<String>) -> Result<RunManifest> {
        self.files.push(MANIFEST_NAME.to_string());
        let m = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            serial,
            config,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
            checks: self.checks.clone(),
            files: self.files.clone(),
            error,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, text + "\n").map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(m)
    }
}
