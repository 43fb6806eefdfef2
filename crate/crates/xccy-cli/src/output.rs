//! CSV tables and the JSON manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use xccy_hjm::SimulationConfig;

use crate::CliError;

/// Float with 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rows of strings under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to reproduce and audit a run. No timestamps, so the
/// manifest is itself a pure function of the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub engine_config_sha256: String,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &str, raw: &[u8], sim: &SimulationConfig) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.into(),
            config_sha256: sha256_hex(raw),
            seed: sim.seed,
            paths: sim.paths,
            dt: sim.dt,
            horizon: sim.horizon,
            engine_config_sha256: String::new(),
            files: Vec::new(),
        }
    }

    pub fn set_engine_hash(&mut self, h: &str) {
        self.engine_config_sha256 = h.into();
    }

    /// Write `bytes` to `dir/name` and record its digest.
    pub fn add(&mut self, dir: &Path, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry { name: name.into(), sha256: sha256_hex(&bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Write `manifest.json` and return every file produced.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
        text.push('\n');
        let path = dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut out: Vec<PathBuf> = self.files.iter().map(|f| dir.join(&f.name)).collect();
        out.push(path);
        Ok(out)
    }
}
