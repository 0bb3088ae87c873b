//! Artifact encoding and run records.

use std::fs;
use std::path::Path;

use parcone::regularization::IterationLog;
use parcone::tcc::{PairRecord, PairStatus, TaylorRow};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One row of the per-pair cone-ratio CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair_index: usize,
    pub seed_offset: u64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
    /// Degenerate or failed pair, excluded from the constant.
    pub skipped_flag: bool,
}

impl From<&PairRecord> for PairRow {
    fn from(p: &PairRecord) -> Self {
        PairRow {
            pair_index: p.pair_index,
            seed_offset: p.seed_offset,
            numerator: p.numerator,
            denominator: p.denominator,
            ratio: p.ratio,
            skipped_flag: p.status != PairStatus::Retained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub residual: f64,
    pub error: Option<f64>,
    pub time_ms: Option<f64>,
}

pub fn iteration_rows(log: &IterationLog) -> Vec<IterationRow> {
    log.records
        .iter()
        .map(|r| IterationRow {
            k: r.k,
            residual: r.residual,
            error: r.error,
            time_ms: r.time_ms,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCsvRow {
    pub t: f64,
    pub remainder: f64,
    pub order: Option<f64>,
}

impl From<&TaylorRow> for TaylorCsvRow {
    fn from(r: &TaylorRow) -> Self {
        TaylorCsvRow {
            t: r.t,
            remainder: r.remainder,
            order: r.order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointRow {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Long-format row for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub value: f64,
}

/// A named file body, produced in memory so that checksums precede writing.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    /// CSV with a header row, also when `rows` is empty.
    pub fn csv<T: Serialize>(name: &str, header: &[&str], rows: &[T]) -> Result<Self, CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Artifact {
            name: name.to_string(),
            bytes,
        })
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact {
            name: name.to_string(),
            bytes,
        })
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

pub const PAIR_HEADER: [&str; 6] = ["pair_index", "seed_offset", "numerator", "denominator", "ratio", "skipped_flag"];
pub const ITERATION_HEADER: [&str; 4] = ["k", "residual", "error", "time_ms"];
pub const TAYLOR_HEADER: [&str; 3] = ["t", "remainder", "order"];
pub const ADJOINT_HEADER: [&str; 4] = ["trial", "lhs", "rhs", "gap"];
pub const PLOT_HEADER: [&str; 3] = ["series", "x", "y"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["step", "t", "x", "u"];
pub const FIELD_HEADER: [&str; 2] = ["x", "value"];

pub fn read_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Self-describing record of one run. Everything except the timestamps is a
/// function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub task: String,
    /// Absent for the acceptance battery, which takes no config.
    pub config: Option<ExperimentConfig>,
    /// SHA-256 of the canonical TOML serialization of `config`, or of the
    /// battery seed.
    pub input_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<ManifestEntry>,
}

pub const RECORD_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Writes the artifacts and the run record into `dir`.
pub fn emit_report(dir: &Path, record: &mut RunRecord, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    record.outputs.clear();
    for a in artifacts {
        fs::write(dir.join(&a.name), &a.bytes).map_err(|e| CliError::Io(format!("{}: {e}", a.name)))?;
        record.outputs.push(ManifestEntry {
            file: a.name.clone(),
            sha256: a.sha256(),
            bytes: a.bytes.len(),
        });
    }
    let rec = Artifact::json(RECORD_FILE, record)?;
    fs::write(dir.join(RECORD_FILE), rec.bytes).map_err(|e| CliError::Io(format!("{RECORD_FILE}: {e}")))?;
    Ok(())
}
