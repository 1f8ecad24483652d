//! `decompose`: estimate components from a dataset CSV.

use std::path::{Path, PathBuf};

use daim_core::decomposition::DEFAULT_DEDUP_RADIUS;
use daim_core::metrics::matching_error;
use daim_core::{decompose_dataset, Backend, DecompositionResult, PowerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_failure, CliResult};
use crate::io::{create, read_dataset, read_json, truth_path, GroundTruth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub dataset: PathBuf,
    pub k: usize,
    #[serde(rename = "L", default = "default_inits")]
    pub num_inits: usize,
    #[serde(rename = "N", default = "default_iters")]
    pub num_iters: usize,
    #[serde(default)]
    pub s_bar: Option<usize>,
    #[serde(default = "default_radius")]
    pub dedup_radius: f64,
    #[serde(default)]
    pub backend: Backend,
    /// Ground truth sidecar; defaults to the dataset's `.truth.json` sibling.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_inits() -> usize {
    200
}

fn default_iters() -> usize {
    300
}

fn default_radius() -> f64 {
    DEFAULT_DEDUP_RADIUS
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub result: DecompositionResult,
    pub matching_error: Option<f64>,
}

pub fn run_decompose(config: &DecomposeConfig) -> CliResult<DecomposeReport> {
    let data = read_dataset(&config.dataset)?;
    let mut power = PowerConfig::new(config.num_inits, config.num_iters, config.k, config.seed)
        .with_truncation(config.s_bar);
    power.dedup_radius = config.dedup_radius;
    let result = decompose_dataset(&data, &power, config.backend)?;

    let truth_file = config.truth.clone().unwrap_or_else(|| truth_path(&config.dataset));
    let matching = if truth_file.exists() {
        let truth: GroundTruth = read_json(&truth_file)?;
        let params = truth.params()?;
        if result.exhausted || params.k() != result.components.len() {
            None
        } else {
            Some(matching_error(&result.components, &params)?)
        }
    } else {
        None
    };
    Ok(DecomposeReport {
        result,
        matching_error: matching,
    })
}

pub fn cmd_decompose(config: &DecomposeConfig, out: &Path) -> CliResult<DecomposeReport> {
    let report = run_decompose(config)?;
    let mut w = create(out)?;
    report.result.write_csv(&mut w).map_err(|e| io_failure(out, e))?;
    std::io::Write::flush(&mut w).map_err(|e| io_failure(out, e))?;
    Ok(report)
}
