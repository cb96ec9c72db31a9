//! Atomic file output, CSV formatting and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// 17 significant digits; parses back to the same double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: format!("{}\n", header.join(",")), width: header.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.width);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn nums(&mut self, xs: &[f64]) {
        self.row(&xs.iter().map(|&x| num(x)).collect::<Vec<_>>());
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileEntry>,
    /// Command-specific diagnostics (tail masses, property checks, ...).
    #[serde(default)]
    pub notes: serde_json::Value,
}

pub const MANIFEST: &str = "manifest.json";

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects files written by one command and emits the manifest last.
pub struct OutDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    started: f64,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutDir { root: root.into(), files: Vec::new(), started: unix_now() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.root.join(name), bytes)?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        notes: serde_json::Value,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            started_unix: self.started,
            finished_unix: unix_now(),
            files: self.files,
            notes,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Re-hash every listed file; returns the paths whose digest differs or that are missing.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(m.files
        .iter()
        .filter(|f| fs::read(dir.join(&f.path)).map(|b| sha256_hex(&b) != f.sha256).unwrap_or(true))
        .map(|f| f.path.clone())
        .collect())
}
