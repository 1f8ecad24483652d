//! Dataset CSV and ground-truth sidecar files.
//!
//! Dataset CSV: header `x_1,...,x_d,y`, one observation per row. Values are
//! written in shortest round-trip form so a re-read is bit-exact.
//!
//! Ground truth: JSON next to the dataset, `data.csv` → `data.truth.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use daim_core::{Dataset, LinkKind, ModelKind, ParamSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_failure, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub model_kind: ModelKind,
    pub links: Vec<LinkKind>,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub noise_sd: f64,
    pub weights: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Index vectors, one inner list per component.
    pub beta: Vec<Vec<f64>>,
    pub sparsity: Option<usize>,
    pub incoherence: f64,
    pub seed: u64,
}

impl GroundTruth {
    pub fn params(&self) -> CliResult<ParamSet> {
        Ok(ParamSet::new(self.beta.clone(), self.sparsity)?)
    }
}

pub fn truth_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("truth.json")
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_failure(path, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let mut w = create(path)?;
    let d = data.dim();
    let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).chain(["y".to_string()]).collect();
    let mut text = header.join(",");
    text.push('\n');
    for i in 0..data.n() {
        for x in data.row(i) {
            text.push_str(&format!("{x},"));
        }
        text.push_str(&format!("{}\n", data.y()[i]));
        if text.len() > 1 << 16 {
            w.write_all(text.as_bytes()).map_err(|e| io_failure(path, e))?;
            text.clear();
        }
    }
    w.write_all(text.as_bytes()).map_err(|e| io_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let malformed = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| malformed(e.to_string()))?;
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let width = headers.len();
    if width < 2 || headers.get(width - 1) != Some("y") {
        return Err(malformed("header must be x_1,...,x_d,y".into()));
    }
    let d = width - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != width {
            return Err(malformed(format!("row {} has {} fields, expected {width}", line + 1, record.len())));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| malformed(format!("row {}, column {}: `{field}` is not a number", line + 1, col + 1)))?;
            if col < d {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(malformed("no observations".into()));
    }
    Dataset::new(x, y, d).map_err(|e| malformed(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_failure(path, e))?;
    w.write_all(b"\n").map_err(|e| io_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

/// Reads a JSON config; unknown or missing keys are reported by name.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}
