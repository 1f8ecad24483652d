//! `experiment`: Monte Carlo sweeps over `(k, n)` with one CSV row per trial.
//!
//! Trial `t` of cell `c` (cells ordered `k`-major, then `n`) uses the seed
//! `derive_seed(base_seed, [c, t])`; the parameter draw, the data draw and the
//! power-method initializations take sub-streams `0`, `1` and `2` of that
//! seed. Rows are emitted in `(cell, trial)` order whatever the worker count,
//! so the CSV bytes depend only on the plan (timings excepted, see
//! `record_timing`).

use std::path::{Path, PathBuf};
use std::time::Instant;

use daim_core::metrics::{inverse_signal_strength_highdim, inverse_signal_strength_lowdim, matching_error, MAX_MATCHING_K};
use daim_core::models::{generate_params_highdim, generate_params_lowdim, incoherence, sample_dataset, DEFAULT_KAPPA};
use daim_core::rng::{derive_seed, stream};
use daim_core::{decompose_dataset, Backend, LinkKind, ModelKind, ModelSpec, PowerConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_failure, CliError, CliResult};
use crate::io::{create, write_json};
use crate::simulate::default_model;

/// Trials per cell used when the plan leaves `trials` unset.
pub const DEFAULT_TRIALS: usize = 20;
/// Trials per cell with `--full-trials`.
pub const FULL_TRIALS: usize = 100;

pub const TRIAL_HEADER: &str = "trial_id,model,link,d,k,s,s_bar,n,seed,error,inv_signal,psi,wall_ms,exhausted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_model")]
    pub model_kind: ModelKind,
    pub link: LinkKind,
    pub d: usize,
    pub k_list: Vec<usize>,
    /// Sparsity of the true components; enables the truncated method.
    #[serde(default)]
    pub s: Option<usize>,
    /// Truncation level; defaults to `3s` when `s` is set.
    #[serde(default)]
    pub s_bar: Option<usize>,
    pub n_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to 200 (dense) or 100 (sparse).
    #[serde(rename = "L", default)]
    pub num_inits: Option<usize>,
    /// Defaults to 300 (dense) or 200 (sparse).
    #[serde(rename = "N", default)]
    pub num_iters: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    /// Write measured wall times; otherwise `wall_ms` is 0 and the CSV is
    /// byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_parallelism() -> usize {
    1
}

impl ExperimentPlan {
    pub fn sparse(&self) -> bool {
        self.s.is_some()
    }

    pub fn inits(&self) -> usize {
        self.num_inits.unwrap_or(if self.sparse() { 100 } else { 200 })
    }

    pub fn iters(&self) -> usize {
        self.num_iters.unwrap_or(if self.sparse() { 200 } else { 300 })
    }

    pub fn truncation(&self) -> Option<usize> {
        self.s.map(|s| self.s_bar.unwrap_or(3 * s).min(self.d))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.k_list.is_empty() {
            return bad("k_list must not be empty".into());
        }
        if self.n_list.is_empty() {
            return bad("n_list must not be empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.s_bar.is_some() && self.s.is_none() {
            return bad("s_bar requires s".into());
        }
        if let Some(sb) = self.s_bar {
            if sb == 0 || sb > self.d {
                return bad(format!("s_bar = {sb} must lie in [1, d]"));
            }
        }
        for &k in &self.k_list {
            if k == 0 || k > MAX_MATCHING_K {
                return bad(format!("k = {k} must lie in [1, {MAX_MATCHING_K}]"));
            }
            if k > self.inits() {
                return bad(format!("k = {k} exceeds L = {}", self.inits()));
            }
            match self.s {
                None if k > self.d => return bad(format!("k = {k} exceeds d = {}", self.d)),
                Some(s) if s == 0 || k.div_ceil(s) * s > self.d => {
                    return bad(format!("k = {k} components with sparsity {s} do not fit in d = {}", self.d))
                }
                _ => {}
            }
        }
        if self.n_list.contains(&0) {
            return bad("every n must be at least 1".into());
        }
        if self.inits() == 0 || self.iters() == 0 {
            return bad("L and N must be at least 1".into());
        }
        Ok(())
    }

    /// `(k, n)` per cell, `k`-major.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.k_list
            .iter()
            .flat_map(|&k| self.n_list.iter().map(move |&n| (k, n)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    #[serde(rename = "model")]
    pub model_kind: ModelKind,
    pub link: LinkKind,
    pub d: usize,
    pub k: usize,
    pub s: Option<usize>,
    pub s_bar: Option<usize>,
    pub n: usize,
    pub seed: u64,
    /// Matching error; `√2` when fewer than `k` components were found.
    #[serde(rename = "error")]
    pub matching_error: f64,
    #[serde(rename = "inv_signal")]
    pub inverse_signal_strength: f64,
    #[serde(rename = "psi")]
    pub incoherence_psi: f64,
    pub wall_ms: f64,
    pub exhausted: bool,
}

pub fn run_trial(plan: &ExperimentPlan, cell: usize, trial: usize) -> CliResult<TrialRecord> {
    let (k, n) = plan.cells()[cell];
    let seed = derive_seed(plan.base_seed, &[cell as u64, trial as u64]);
    let start = Instant::now();
    let kappa = plan.kappa.unwrap_or(DEFAULT_KAPPA);

    let mut param_rng = stream(derive_seed(seed, &[0]));
    let params = match plan.s {
        Some(s) => generate_params_highdim(plan.d, k, s, kappa, &mut param_rng)?,
        None => generate_params_lowdim(plan.d, k, kappa, &mut param_rng)?,
    };
    let spec = ModelSpec::new(plan.model_kind, plan.d, k, plan.link)?;
    let data = sample_dataset(&spec, &params, n, &mut stream(derive_seed(seed, &[1])))?;
    let power = PowerConfig::new(plan.inits(), plan.iters(), k, derive_seed(seed, &[2]))
        .with_truncation(plan.truncation());
    let result = decompose_dataset(&data, &power, plan.backend)?;
    let error = if result.exhausted {
        std::f64::consts::SQRT_2
    } else {
        matching_error(&result.components, &params)?
    };
    let inv_signal = match plan.s {
        Some(s) => inverse_signal_strength_highdim(s as f64, plan.d as f64, n as f64),
        None => inverse_signal_strength_lowdim(plan.d as f64, n as f64),
    };
    let wall_ms = if plan.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(TrialRecord {
        trial_id: cell * plan.trials + trial,
        model_kind: plan.model_kind,
        link: plan.link,
        d: plan.d,
        k,
        s: plan.s,
        s_bar: plan.truncation(),
        n,
        seed,
        matching_error: error,
        inverse_signal_strength: inv_signal,
        incoherence_psi: incoherence(&params),
        wall_ms,
        exhausted: result.exhausted,
    })
}

/// Runs every trial on a pool of `plan.parallelism` workers; rows come back
/// in canonical order.
pub fn run_plan(plan: &ExperimentPlan) -> CliResult<Vec<TrialRecord>> {
    plan.validate()?;
    let tasks: Vec<(usize, usize)> = (0..plan.cells().len())
        .flat_map(|c| (0..plan.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| run_trial(plan, c, t))
            .collect()
    })
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> CliResult<()> {
    let file = create(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(file);
    for r in records {
        w.serialize(r).map_err(|e| io_failure(path, e))?;
    }
    if records.is_empty() {
        w.write_record(TRIAL_HEADER.split(',')).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

#[derive(Serialize)]
struct PlanMetadata<'a> {
    plan: &'a ExperimentPlan,
    columns: &'static str,
    inv_signal: &'static str,
    error: &'static str,
}

pub fn metadata_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

pub fn cmd_experiment(plan: &ExperimentPlan, out: &Path) -> CliResult<Vec<TrialRecord>> {
    plan.validate()?;
    // Fail on an unwritable path before spending the compute.
    create(out)?;
    let records = run_plan(plan)?;
    write_records(out, &records)?;
    let meta = PlanMetadata {
        plan,
        columns: TRIAL_HEADER,
        inv_signal: if plan.sparse() {
            "max(sqrt(s*ln(d)/n), (s*ln(d))^(5/2)/n)"
        } else {
            "max(sqrt(d/n), d^(5/2)/n); the d^(5/2) exponent matches the concentration rate, not d^(3/2)"
        },
        error: "min over assignments of max_j min(|b_j - b*_j|, |b_j + b*_j|); sqrt(2) when exhausted",
    };
    write_json(&metadata_path(out), &meta)?;
    Ok(records)
}
