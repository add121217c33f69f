//! CSV tables and the JSON run manifest.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::Command;

use dpma_core::scene::SystemConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{DropRecord, Row};
use crate::spec::ExperimentSpec;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A row type with a fixed header; the header is written even for an empty
/// table.
pub trait CsvTable: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvTable for Row {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "sweep_param",
        "sweep_value",
        "scheme",
        "metric",
        "iteration",
        "mean",
        "std_error",
        "n_ok",
        "n_failed",
        "mean_iters",
        "mean_inner_iters",
        "converged_fraction",
        "error",
    ];
}

impl CsvTable for DropRecord {
    const HEADER: &'static [&'static str] = &[
        "sweep_value",
        "scheme",
        "drop",
        "metric",
        "iteration",
        "value",
        "iters",
        "inner_iters",
        "converged",
        "rejected_updates",
        "error",
    ];
}

pub fn csv_bytes<T: CsvTable>(rows: &[T]) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| OutputError::Io { path: "<memory>".into(), source: e.into_error() })
}

pub fn emit_csv<T: CsvTable>(rows: &[T], path: &Path) -> Result<(), OutputError> {
    let bytes = csv_bytes(rows)?;
    write_file(path, &bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io_err = |source| OutputError::Io { path: path.display().to_string(), source };
    let mut f = File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config: SystemConfig,
    pub spec: ExperimentSpec,
    pub full_scale: bool,
    pub git_describe: String,
    pub crate_version: String,
    pub wall_time_s: f64,
    pub point_wall_time_s: Vec<f64>,
    pub failed_records: usize,
    pub outputs: Vec<String>,
}

/// `git describe --always --dirty` of the source tree, or `unknown`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), OutputError> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}
