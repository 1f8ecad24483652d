//! `simulate`: draw a dataset and write it with its ground truth.

use std::path::{Path, PathBuf};

use daim_core::models::{generate_params_highdim, generate_params_lowdim, incoherence, sample_dataset, DEFAULT_KAPPA};
use daim_core::rng::{derive_seed, stream};
use daim_core::{Dataset, LinkKind, ModelKind, ModelSpec, ParamSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{truth_path, write_dataset, write_json, GroundTruth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_model")]
    pub model_kind: ModelKind,
    pub link: LinkKind,
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// Defaults to `√(1/k)`.
    #[serde(default)]
    pub noise_sd: Option<f64>,
    /// Mixture proportions; uniform by default.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Sparsity; switches to disjoint-support sparse parameters.
    #[serde(default)]
    pub s: Option<usize>,
    /// Explicit index vectors, overriding random generation.
    #[serde(default)]
    pub beta: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

pub(crate) fn default_model() -> ModelKind {
    ModelKind::Discordant
}

impl SimulateConfig {
    pub fn model_spec(&self) -> CliResult<ModelSpec> {
        let mut spec = ModelSpec::new(self.model_kind, self.d, self.k, self.link)?;
        if let Some(sd) = self.noise_sd {
            spec = spec.with_noise_sd(sd)?;
        }
        if let Some(w) = &self.weights {
            spec = spec.with_weights(w.clone())?;
        }
        Ok(spec)
    }

    pub fn params(&self) -> CliResult<ParamSet> {
        let kappa = self.kappa.unwrap_or(DEFAULT_KAPPA);
        let mut rng = stream(derive_seed(self.seed, &[0]));
        let params = match (&self.beta, self.s) {
            (Some(beta), s) => ParamSet::new(beta.clone(), s)?,
            (None, Some(s)) => generate_params_highdim(self.d, self.k, s, kappa, &mut rng)?,
            (None, None) => generate_params_lowdim(self.d, self.k, kappa, &mut rng)?,
        };
        if params.dim() != self.d || params.k() != self.k {
            return Err(CliError::Invalid(format!(
                "beta must hold k = {} vectors of length d = {}",
                self.k, self.d
            )));
        }
        Ok(params)
    }
}

pub struct Simulation {
    pub data: Dataset,
    pub truth: GroundTruth,
}

pub fn simulate(config: &SimulateConfig) -> CliResult<Simulation> {
    let spec = config.model_spec()?;
    let params = config.params()?;
    let mut rng = stream(derive_seed(config.seed, &[1]));
    let data = sample_dataset(&spec, &params, config.n, &mut rng)?;
    let truth = GroundTruth {
        model_kind: spec.model_kind,
        links: spec.links.clone(),
        d: spec.d,
        k: spec.k,
        n: config.n,
        noise_sd: spec.noise_sd,
        weights: spec.component_weights(),
        gammas: spec.gammas(),
        incoherence: incoherence(&params),
        beta: params.columns().to_vec(),
        sparsity: params.sparsity(),
        seed: config.seed,
    };
    Ok(Simulation { data, truth })
}

/// Writes the dataset CSV to `out` and the truth sidecar beside it.
pub fn cmd_simulate(config: &SimulateConfig, out: &Path) -> CliResult<()> {
    let sim = simulate(config)?;
    write_dataset(out, &sim.data)?;
    write_json(&truth_path(out), &sim.truth)
}
