//! Tensor power method, its truncated (sparse) variant, and the greedy
//! clustering step that turns `L` power-method candidates into `k`
//! components.
//!
//! Everything works through [`TensorOperator`], so the same code runs on a
//! dense [`SymTensor3`](crate::tensor::SymTensor3) or on an
//! [`ImplicitMoment`](crate::moments::ImplicitMoment).

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, random_unit, scale_in_place};
use crate::metrics::sign_flip_distance_unchecked;
use crate::models::Dataset;
use crate::moments::{build_moment_tensor_dense, ImplicitMoment, DENSE_DIM_LIMIT};
use crate::rng::{derive_seed, stream};
use crate::tensor::TensorOperator;

pub use crate::linalg::truncate_normalize;

/// Contraction norms below this are treated as a degenerate iterate.
pub const DEGENERATE_THRESHOLD: f64 = 1e-14;
/// Re-draws allowed per initialization after a degenerate iterate.
pub const MAX_REDRAWS: usize = 10;
pub const DEFAULT_DEDUP_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Uniform on the sphere, one independent stream per initialization.
    RandomUnit,
    /// Explicit unit starting vectors, one per initialization.
    Provided(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    /// `L`, number of initializations.
    pub num_inits: usize,
    /// `N`, power iterations per initialization (and per refinement).
    pub num_iters: usize,
    /// `k`, components to extract.
    pub rank: usize,
    /// `s̄`; truncated power iterations when set.
    pub truncation: Option<usize>,
    pub dedup_radius: f64,
    pub init: Init,
    pub seed: u64,
}

impl PowerConfig {
    pub fn new(num_inits: usize, num_iters: usize, rank: usize, seed: u64) -> Self {
        Self {
            num_inits,
            num_iters,
            rank,
            truncation: None,
            dedup_radius: DEFAULT_DEDUP_RADIUS,
            init: Init::RandomUnit,
            seed,
        }
    }

    pub fn with_truncation(mut self, s_bar: Option<usize>) -> Self {
        self.truncation = s_bar;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.rank == 0 || self.num_inits < self.rank {
            return Err(Error::InvalidArgument(format!(
                "need L >= k >= 1, got L = {}, k = {}",
                self.num_inits, self.rank
            )));
        }
        if self.num_iters == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if let Some(s) = self.truncation {
            if s == 0 || s > d {
                return Err(Error::InvalidArgument(format!(
                    "truncation s_bar = {s} must lie in [1, {d}]"
                )));
            }
        }
        if !(self.dedup_radius > 0.0) {
            return Err(Error::InvalidArgument("dedup_radius must be positive".into()));
        }
        if let Init::Provided(starts) = &self.init {
            if starts.len() != self.num_inits {
                return Err(Error::DimensionMismatch {
                    expected: self.num_inits,
                    found: starts.len(),
                });
            }
            for u in starts {
                check_unit(d, u)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub components: Vec<Vec<f64>>,
    /// `λ_j = M(v_j, v_j, v_j)`.
    pub weights: Vec<f64>,
    /// Candidates that entered clustering.
    pub candidates_used: usize,
    /// Initializations re-drawn after a degenerate iterate.
    pub redraws: usize,
    /// Fewer than `k` clusters were found.
    pub exhausted: bool,
}

impl DecompositionResult {
    /// CSV rows `component_index,weight,v_1..v_d,exhausted` with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.components.first().map(Vec::len).unwrap_or(0);
        let mut header = String::from("component_index,weight");
        for i in 1..=d {
            header.push_str(&format!(",v_{i}"));
        }
        header.push_str(",exhausted");
        writeln!(w, "{header}")?;
        for (j, (v, lambda)) in self.components.iter().zip(&self.weights).enumerate() {
            write!(w, "{j},{lambda}")?;
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{}", self.exhausted)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    /// Final iterates ordered by initialization index.
    pub vectors: Vec<Vec<f64>>,
    pub redraws: usize,
    /// Initializations that stayed degenerate through every re-draw.
    pub discarded: usize,
}

fn check_unit(d: usize, u: &[f64]) -> Result<()> {
    check_len(d, u)?;
    let n = norm(u);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit(n));
    }
    Ok(())
}

/// `M(I, u, u) / ‖M(I, u, u)‖`.
pub fn power_step<M: TensorOperator + ?Sized>(m: &M, u: &[f64]) -> Result<Vec<f64>> {
    check_unit(m.dim(), u)?;
    raw_step(m, u)
}

fn raw_step<M: TensorOperator + ?Sized>(m: &M, u: &[f64]) -> Result<Vec<f64>> {
    let mut c = m.contract(u, u)?;
    let nc = norm(&c);
    if !(nc >= DEGENERATE_THRESHOLD) {
        return Err(Error::DegenerateIterate(nc));
    }
    scale_in_place(&mut c, 1.0 / nc);
    Ok(c)
}

fn step<M: TensorOperator + ?Sized>(m: &M, u: &[f64], truncation: Option<usize>) -> Result<Vec<f64>> {
    let next = raw_step(m, u)?;
    match truncation {
        Some(s) => truncate_normalize(&next, s),
        None => Ok(next),
    }
}

/// Runs `iters` (truncated) power steps from `u0`.
pub fn power_iterate<M: TensorOperator + ?Sized>(
    m: &M,
    u0: &[f64],
    iters: usize,
    truncation: Option<usize>,
) -> Result<Vec<f64>> {
    check_unit(m.dim(), u0)?;
    let mut u = u0.to_vec();
    for _ in 0..iters {
        u = step(m, &u, truncation)?;
    }
    Ok(u)
}

/// [`power_iterate`] that also records every iterate (starting with `u0`),
/// for convergence diagnostics.
pub fn power_iterate_traced<M: TensorOperator + ?Sized>(
    m: &M,
    u0: &[f64],
    iters: usize,
    truncation: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    check_unit(m.dim(), u0)?;
    let mut path = Vec::with_capacity(iters + 1);
    path.push(u0.to_vec());
    for t in 0..iters {
        let next = step(m, &path[t], truncation)?;
        path.push(next);
    }
    Ok(path)
}

/// `L` independent (truncated) power-method runs of `N` steps each.
///
/// Initialization `τ` draws from its own stream seeded by
/// `derive_seed(config.seed, [τ])`, so the output does not depend on thread
/// scheduling. A run that hits a degenerate iterate is restarted from a fresh
/// random vector, at most [`MAX_REDRAWS`] times.
pub fn run_power_candidates<M: TensorOperator + ?Sized>(m: &M, config: &PowerConfig) -> Result<Candidates> {
    let d = m.dim();
    config.validate(d)?;
    let runs: Vec<(Option<Vec<f64>>, usize)> = (0..config.num_inits)
        .into_par_iter()
        .map(|tau| {
            let mut rng = stream(derive_seed(config.seed, &[tau as u64]));
            let mut redraws = 0;
            for attempt in 0..=MAX_REDRAWS {
                let u0 = match (&config.init, attempt) {
                    (Init::Provided(starts), 0) => starts[tau].clone(),
                    _ => random_unit(d, &mut rng),
                };
                match power_iterate(m, &u0, config.num_iters, config.truncation) {
                    Ok(v) => return Ok((Some(v), redraws)),
                    Err(Error::DegenerateIterate(_)) => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((None, redraws))
        })
        .collect::<Result<_>>()?;

    let redraws = runs.iter().map(|r| r.1).sum();
    let vectors: Vec<Vec<f64>> = runs.into_iter().filter_map(|r| r.0).collect();
    let discarded = config.num_inits - vectors.len();
    if vectors.is_empty() {
        return Err(Error::AllInitializationsDegenerate(config.num_inits));
    }
    Ok(Candidates {
        vectors,
        redraws,
        discarded,
    })
}

/// Greedy clustering of power-method candidates.
///
/// Each round picks the remaining candidate with the largest `|M(v,v,v)|`
/// (lowest index on ties), refines it with `iters` further power steps,
/// records the refined vector and `λ = M(v̂,v̂,v̂)`, and drops every
/// remaining candidate within sign-flip distance `dedup_radius` of the
/// refined vector. The picked candidate itself is always dropped.
pub fn cluster_candidates<M: TensorOperator + ?Sized>(
    m: &M,
    candidates: &[Vec<f64>],
    k: usize,
    iters: usize,
    truncation: Option<usize>,
    dedup_radius: f64,
) -> Result<DecompositionResult> {
    let d = m.dim();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to cluster".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(dedup_radius > 0.0) {
        return Err(Error::InvalidArgument("dedup_radius must be positive".into()));
    }
    for c in candidates {
        check_unit(d, c)?;
    }
    let scores = candidates
        .par_iter()
        .map(|v| m.cubic_form(v).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?;

    let mut alive: Vec<usize> = (0..candidates.len()).collect();
    let mut components = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    while components.len() < k && !alive.is_empty() {
        let mut best = alive[0];
        for &i in &alive[1..] {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        let picked = &candidates[best];
        let refined = match power_iterate(m, picked, iters, truncation) {
            Ok(v) => v,
            Err(Error::DegenerateIterate(_)) => picked.clone(),
            Err(e) => return Err(e),
        };
        weights.push(m.cubic_form(&refined)?);
        alive.retain(|&i| i != best && sign_flip_distance_unchecked(&candidates[i], &refined) > dedup_radius);
        components.push(refined);
    }
    Ok(DecompositionResult {
        exhausted: components.len() < k,
        components,
        weights,
        candidates_used: candidates.len(),
        redraws: 0,
    })
}

/// Candidates followed by clustering; refinement reuses `N`.
pub fn decompose<M: TensorOperator + ?Sized>(m: &M, config: &PowerConfig) -> Result<DecompositionResult> {
    let cands = run_power_candidates(m, config)?;
    let mut result = cluster_candidates(
        m,
        &cands.vectors,
        config.rank,
        config.num_iters,
        config.truncation,
        config.dedup_radius,
    )?;
    result.redraws = cands.redraws;
    Ok(result)
}

/// How the moment tensor is represented during decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Pick the cheaper of the two from a flop-count model.
    #[default]
    Auto,
    Dense,
    Implicit,
}

impl Backend {
    /// Resolves `Auto`. A dense build costs about `n d³ / 6` plus `d³` per
    /// power step; an implicit contraction costs about `3 n d` per step.
    pub fn resolve(self, n: usize, d: usize, config: &PowerConfig) -> Backend {
        match self {
            Backend::Auto => {
                if d > DENSE_DIM_LIMIT {
                    return Backend::Implicit;
                }
                let (n, d) = (n as f64, d as f64);
                let steps = ((config.num_inits + config.rank) * config.num_iters) as f64;
                let dense = n * d.powi(3) / 6.0 + steps * d.powi(3);
                let implicit = steps * 3.0 * n * d;
                if dense <= implicit {
                    Backend::Dense
                } else {
                    Backend::Implicit
                }
            }
            other => other,
        }
    }
}

/// Builds `M̂` from `data` with the chosen backend and decomposes it.
pub fn decompose_dataset(data: &Dataset, config: &PowerConfig, backend: Backend) -> Result<DecompositionResult> {
    match backend.resolve(data.n(), data.dim(), config) {
        Backend::Implicit => decompose(&ImplicitMoment::new(data), config),
        _ => decompose(&build_moment_tensor_dense(data)?, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SymTensor3;
    use approx::assert_relative_eq;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn diag(coeffs: &[f64], d: usize) -> SymTensor3 {
        let mut t = SymTensor3::zeros(d).unwrap();
        for (i, &c) in coeffs.iter().enumerate() {
            t.rank1_accumulate(c, &e(d, i)).unwrap();
        }
        t
    }

    #[test]
    fn power_step_examples() {
        let t = diag(&[6.0], 3);
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(power_step(&t, &[s, s, s]).unwrap(), e(3, 0));

        let t = diag(&[6.0, 5.0], 2);
        let h = 0.5f64.sqrt();
        let v = power_step(&t, &[h, h]).unwrap();
        assert_relative_eq!(v[0], 3.0 / 15.25f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(v[1], 2.5 / 15.25f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(v[0], 0.768221, epsilon = 1e-6);
        assert_relative_eq!(v[1], 0.640184, epsilon = 1e-6);

        let t = diag(&[6.0], 2);
        assert!(matches!(power_step(&t, &e(2, 1)), Err(Error::DegenerateIterate(_))));
        assert!(matches!(power_step(&t, &[1.0, 1.0]), Err(Error::NotUnit(_))));
    }

    #[test]
    fn truncation_examples() {
        let v = truncate_normalize(&[0.1, -0.5, 0.3, 0.05], 2).unwrap();
        let n = 0.34f64.sqrt();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 0.0);
        assert_relative_eq!(v[1], -0.5 / n, epsilon = 1e-15);
        assert_relative_eq!(v[2], 0.3 / n, epsilon = 1e-15);
        assert_relative_eq!(v[1], -0.857493, epsilon = 1e-6);

        let u = [0.6, 0.0, -0.8];
        assert_eq!(truncate_normalize(&u, 3).unwrap(), u.to_vec());
        assert_eq!(truncate_normalize(&u, 2).unwrap(), u.to_vec());
        // tie at the cut: lower index wins
        assert_eq!(truncate_normalize(&[0.5, 0.5, 0.5], 1).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(truncate_normalize(&[0.0, 0.0], 1).is_err());
        assert!(truncate_normalize(&[1.0, 0.0], 0).is_err());
    }

    #[test]
    fn candidates_on_rank_one() {
        let t = diag(&[6.0], 4);
        let cfg = PowerConfig::new(10, 50, 1, 1);
        let c = run_power_candidates(&t, &cfg).unwrap();
        assert_eq!(c.vectors.len(), 10);
        for v in &c.vectors {
            assert!(sign_flip_distance_unchecked(v, &e(4, 0)) < 1e-12);
        }
    }

    #[test]
    fn zero_tensor_exhausts_redraws() {
        let t = SymTensor3::zeros(3).unwrap();
        let cfg = PowerConfig::new(3, 5, 1, 2);
        assert_eq!(
            run_power_candidates(&t, &cfg),
            Err(Error::AllInitializationsDegenerate(3))
        );
    }

    #[test]
    fn clustering_examples() {
        let t = diag(&[6.0, 5.0], 2);
        let cands = vec![e(2, 0), vec![-1.0, 0.0], e(2, 1)];
        let r = cluster_candidates(&t, &cands, 2, 10, None, 0.5).unwrap();
        assert!(!r.exhausted);
        assert_eq!(r.components, vec![e(2, 0), e(2, 1)]);
        assert_eq!(r.weights, vec![6.0, 5.0]);

        let dup = vec![e(2, 0); 4];
        let r = cluster_candidates(&t, &dup, 2, 10, None, 0.5).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.components.len(), 1);

        let r = cluster_candidates(&t, &cands, 1, 10, None, 0.5).unwrap();
        assert_eq!(r.components, vec![e(2, 0)]);
    }

    #[test]
    fn config_validation() {
        assert!(PowerConfig::new(2, 5, 3, 0).validate(4).is_err());
        assert!(PowerConfig::new(4, 0, 3, 0).validate(4).is_err());
        assert!(PowerConfig::new(4, 5, 3, 0).with_truncation(Some(5)).validate(4).is_err());
        let bad_init = PowerConfig::new(1, 5, 1, 0).with_init(Init::Provided(vec![vec![1.0, 1.0]]));
        assert!(bad_init.validate(2).is_err());
    }

    #[test]
    fn csv_export() {
        let r = DecompositionResult {
            components: vec![vec![1.0, 0.0]],
            weights: vec![6.0],
            candidates_used: 1,
            redraws: 0,
            exhausted: true,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "component_index,weight,v_1,v_2,exhausted\n0,6,1,0,true\n"
        );
    }
}
