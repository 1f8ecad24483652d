//! `verify-concentration`: empirical `‖M̂ - E[Y·S₃(X)]‖` across `(d, n)`.

use std::path::{Path, PathBuf};

use daim_core::metrics::{
    inverse_signal_strength_highdim, inverse_signal_strength_highdim_log_ratio, inverse_signal_strength_lowdim,
};
use daim_core::models::{generate_params_highdim, generate_params_lowdim, sample_dataset, DEFAULT_KAPPA};
use daim_core::moments::{build_moment_tensor_dense, moment_error_norm, population_tensor};
use daim_core::rng::{derive_seed, stream};
use daim_core::tensor::{DEFAULT_NORM_ITERS, DEFAULT_NORM_RESTARTS};
use daim_core::{LinkKind, ModelKind, ModelSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_failure, CliError, CliResult};
use crate::io::create;
use crate::simulate::default_model;

/// Dense tensors are built for every trial; keep them small.
pub const CONCENTRATION_DIM_LIMIT: usize = 64;

pub const CONCENTRATION_HEADER: &str = "d,n,trial,seed,op_error,sparse_error,r,axis_lowdim,axis_sparse,axis_sparse_log_ratio";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub d_list: Vec<usize>,
    pub n_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Also report the `r`-sparse norm.
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default = "default_model")]
    pub model_kind: ModelKind,
    #[serde(default = "default_link")]
    pub link: LinkKind,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Sparse true components when set.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_trials() -> usize {
    20
}
fn default_link() -> LinkKind {
    LinkKind::Cubic
}
fn default_k() -> usize {
    1
}
fn default_restarts() -> usize {
    DEFAULT_NORM_RESTARTS
}
fn default_iters() -> usize {
    DEFAULT_NORM_ITERS
}
fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRecord {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub op_error: f64,
    pub sparse_error: Option<f64>,
    pub r: Option<usize>,
    pub axis_lowdim: f64,
    pub axis_sparse: Option<f64>,
    pub axis_sparse_log_ratio: Option<f64>,
}

impl ConcentrationConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.d_list.is_empty() || self.n_list.is_empty() {
            return bad("d_list and n_list must not be empty".into());
        }
        if self.trials == 0 || self.parallelism == 0 || self.restarts == 0 || self.iters == 0 {
            return bad("trials, parallelism, restarts and iters must be at least 1".into());
        }
        for &d in &self.d_list {
            if d > CONCENTRATION_DIM_LIMIT {
                return bad(format!("d = {d} exceeds the dense limit {CONCENTRATION_DIM_LIMIT}"));
            }
            if let Some(r) = self.r {
                if r == 0 || r > d {
                    return bad(format!("r = {r} must lie in [1, {d}]"));
                }
            }
        }
        if self.n_list.contains(&0) {
            return bad("every n must be at least 1".into());
        }
        Ok(())
    }
}

pub fn concentration_trial(cfg: &ConcentrationConfig, cell: usize, trial: usize) -> CliResult<ConcentrationRecord> {
    let (d, n) = (cfg.d_list[cell / cfg.n_list.len()], cfg.n_list[cell % cfg.n_list.len()]);
    let seed = derive_seed(cfg.seed, &[cell as u64, trial as u64]);
    let kappa = cfg.kappa.unwrap_or(DEFAULT_KAPPA);
    let mut prng = stream(derive_seed(seed, &[0]));
    let params = match cfg.s {
        Some(s) => generate_params_highdim(d, cfg.k, s, kappa, &mut prng)?,
        None => generate_params_lowdim(d, cfg.k, kappa, &mut prng)?,
    };
    let spec = ModelSpec::new(cfg.model_kind, d, cfg.k, cfg.link)?;
    let data = sample_dataset(&spec, &params, n, &mut stream(derive_seed(seed, &[1])))?;
    let empirical = build_moment_tensor_dense(&data)?;
    let population = population_tensor(&params, &spec.gammas(), &spec.component_weights())?;
    let mut nrng = stream(derive_seed(seed, &[2]));
    let op_error = moment_error_norm(&empirical, &population, None, cfg.restarts, cfg.iters, &mut nrng)?;
    let sparse_error = match cfg.r {
        Some(r) => Some(moment_error_norm(&empirical, &population, Some(r), cfg.restarts, cfg.iters, &mut nrng)?),
        None => None,
    };
    let (df, nf) = (d as f64, n as f64);
    Ok(ConcentrationRecord {
        d,
        n,
        trial,
        seed,
        op_error,
        sparse_error,
        r: cfg.r,
        axis_lowdim: inverse_signal_strength_lowdim(df, nf),
        axis_sparse: cfg.r.map(|r| inverse_signal_strength_highdim(r as f64, df, nf)),
        axis_sparse_log_ratio: cfg
            .r
            .map(|r| inverse_signal_strength_highdim_log_ratio(r as f64, df, r as f64, nf)),
    })
}

pub fn run_concentration(cfg: &ConcentrationConfig) -> CliResult<Vec<ConcentrationRecord>> {
    cfg.validate()?;
    let cells = cfg.d_list.len() * cfg.n_list.len();
    let tasks: Vec<(usize, usize)> = (0..cells)
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| concentration_trial(cfg, c, t))
            .collect()
    })
}

pub fn cmd_verify_concentration(cfg: &ConcentrationConfig, out: &Path) -> CliResult<Vec<ConcentrationRecord>> {
    cfg.validate()?;
    create(out)?;
    let records = run_concentration(cfg)?;
    let file = create(out)?;
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(file);
    for r in &records {
        w.serialize(r).map_err(|e| io_failure(out, e))?;
    }
    w.flush().map_err(|e| io_failure(out, e))?;
    Ok(records)
}
