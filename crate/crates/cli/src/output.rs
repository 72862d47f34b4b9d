//! CSV tables, run manifests and JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};

use decoctl_core::recipes::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::CliError;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce a run; written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: Option<String>,
    pub engine_version: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub phase_convention: Option<String>,
    /// Effective defaults (grid step, memory window, tolerances, ...).
    pub resolved: serde_json::Value,
    pub outputs: Vec<String>,
    pub started: String,
    pub finished: String,
}

/// JSON summary of a config-driven run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest: String,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub results: serde_json::Value,
}

/// Recovers the config recorded in a summary and checks its hash.
pub fn config_from_summary(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)?;
    let s: RunSummary = serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if s.config.hash() != s.config_hash {
        return Err(CliError::validation(format!("{}: config hash mismatch", path.display())));
    }
    Ok(s.config)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Writes `columns` and every `stride`-th row (the last row is always kept).
pub fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>], stride: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns)?;
    let stride = stride.max(1);
    for (i, row) in rows.iter().enumerate() {
        if i % stride == 0 || i + 1 == rows.len() {
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(dir: &Path, d: &Dataset, stride: usize) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.csv", d.name));
    write_csv(&path, &d.columns, &d.rows, stride)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
