//! Synthetic discordant and mixture single-index models.
//!
//! A discordant model observes the average of `k` latent single-index
//! responses, `y = (1/k) Σ_j [h_j(<x, β_j>) + ε_j]`. A mixture model observes
//! one of them, chosen by a latent label drawn independently of `x`:
//! `y = h_z(<x, θ_z>) + ε`, `z ~ Categorical(π)`. Covariates are standard
//! Gaussian in both cases.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scale_in_place, standard_normal_vec};
use crate::quadrature::GaussHermite;

/// Link functions used by the simulation studies; each is a cubic plus an
/// even perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// `u³`
    Cubic,
    /// `u³ + 10·exp(-u²)`
    #[serde(alias = "h1")]
    CubicExp,
    /// `u³ + 5·sin(2u²)`
    #[serde(alias = "h2")]
    CubicSin,
    /// `u³ + 10·tanh(u²)`
    #[serde(alias = "h3")]
    CubicTanh,
}

impl LinkKind {
    pub const ALL: [LinkKind; 4] = [
        LinkKind::Cubic,
        LinkKind::CubicExp,
        LinkKind::CubicSin,
        LinkKind::CubicTanh,
    ];

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        let cube = u * u * u;
        match self {
            LinkKind::Cubic => cube,
            LinkKind::CubicExp => cube + 10.0 * (-(u * u)).exp(),
            LinkKind::CubicSin => cube + 5.0 * (2.0 * u * u).sin(),
            LinkKind::CubicTanh => cube + 10.0 * (u * u).tanh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Cubic => "cubic",
            LinkKind::CubicExp => "cubic_exp",
            LinkKind::CubicSin => "cubic_sin",
            LinkKind::CubicTanh => "cubic_tanh",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic" => Ok(LinkKind::Cubic),
            "cubic_exp" | "h1" => Ok(LinkKind::CubicExp),
            "cubic_sin" | "h2" => Ok(LinkKind::CubicSin),
            "cubic_tanh" | "h3" => Ok(LinkKind::CubicTanh),
            other => Err(Error::InvalidArgument(format!("unknown link `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Discordant,
    Mixture,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Discordant => "discordant",
            ModelKind::Mixture => "mixture",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_kind: ModelKind,
    pub d: usize,
    pub k: usize,
    pub links: Vec<LinkKind>,
    pub noise_sd: f64,
    /// Mixing proportions; only read for mixtures.
    pub weights: Vec<f64>,
}

impl ModelSpec {
    /// Shared link for all components, noise variance `1/k`, uniform weights.
    pub fn new(model_kind: ModelKind, d: usize, k: usize, link: LinkKind) -> Result<Self> {
        let spec = Self {
            model_kind,
            d,
            k,
            links: vec![link; k],
            noise_sd: (1.0 / k.max(1) as f64).sqrt(),
            weights: vec![1.0 / k.max(1) as f64; k],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Result<Self> {
        self.noise_sd = noise_sd;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("d and k must be at least 1".into()));
        }
        if self.links.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: self.links.len(),
            });
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidArgument("noise_sd must be finite and nonnegative".into()));
        }
        if self.model_kind == ModelKind::Mixture {
            if self.weights.len() != self.k {
                return Err(Error::DimensionMismatch {
                    expected: self.k,
                    found: self.weights.len(),
                });
            }
            if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidArgument("mixing weights must be nonnegative".into()));
            }
            let total: f64 = self.weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "mixing weights sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Weight of each rank-1 term in `E[Y·S₃(X)]`: `1/k` for discordant
    /// models, the mixing proportions for mixtures.
    pub fn component_weights(&self) -> Vec<f64> {
        match self.model_kind {
            ModelKind::Discordant => vec![1.0 / self.k as f64; self.k],
            ModelKind::Mixture => self.weights.clone(),
        }
    }

    pub fn gammas(&self) -> Vec<f64> {
        let q = GaussHermite::new(GAMMA_QUADRATURE_POINTS);
        self.links.iter().map(|&l| gamma_with(&q, l)).collect()
    }
}

/// Unit index vectors `β_1..β_k` (columns), optionally `s`-sparse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    columns: Vec<Vec<f64>>,
    sparsity: Option<usize>,
}

impl ParamSet {
    pub fn new(columns: Vec<Vec<f64>>, sparsity: Option<usize>) -> Result<Self> {
        let d = columns.first().map(Vec::len).unwrap_or(0);
        if columns.is_empty() || d == 0 {
            return Err(Error::InvalidArgument("parameter set needs k >= 1 columns of length d >= 1".into()));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.len(),
                });
            }
            let n = norm(c);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "column {j} has norm {n}, expected 1"
                )));
            }
            if let Some(s) = sparsity {
                let nnz = c.iter().filter(|x| **x != 0.0).count();
                if nnz > s {
                    return Err(Error::InvalidArgument(format!(
                        "column {j} has {nnz} nonzeros, exceeding sparsity {s}"
                    )));
                }
            }
        }
        Ok(Self { columns, sparsity })
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn sparsity(&self) -> Option<usize> {
        self.sparsity
    }
}

/// `n` observations: row-major covariates `x` (`n × d`) and responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || y.is_empty() {
            return Err(Error::InvalidArgument("dataset needs d >= 1 and n >= 1".into()));
        }
        if x.len() != y.len() * d {
            return Err(Error::DimensionMismatch {
                expected: y.len() * d,
                found: x.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset entries must be finite".into()));
        }
        Ok(Self { x, y, d })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Perturbation scale used when none is given.
pub const DEFAULT_KAPPA: f64 = 0.1;
/// Low-dimensional draws are rejected while `ψ > C / √d`.
pub const INCOHERENCE_REJECTION_CONSTANT: f64 = 2.0;
const MAX_REJECTIONS: usize = 1000;

/// Random orthonormal `v_1..v_k` perturbed as `(v_j + κ e_j) / ‖v_j + κ e_j‖`
/// with `e_j ~ N(0, I_d)`, redrawn until `ψ <= 2/√d`.
pub fn generate_params_lowdim<R: Rng + ?Sized>(d: usize, k: usize, kappa: f64, rng: &mut R) -> Result<ParamSet> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= d for an orthonormal base, got k = {k}, d = {d}"
        )));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument("kappa must be finite and nonnegative".into()));
    }
    let limit = INCOHERENCE_REJECTION_CONSTANT / (d as f64).sqrt();
    for _ in 0..MAX_REJECTIONS {
        let mut columns = random_orthonormal(d, k, rng);
        if kappa > 0.0 {
            for c in &mut columns {
                let e = standard_normal_vec(d, rng);
                c.iter_mut().zip(&e).for_each(|(a, b)| *a += kappa * b);
                let n = norm(c);
                scale_in_place(c, 1.0 / n);
            }
        }
        let params = ParamSet::new(columns, None)?;
        if incoherence(&params) <= limit {
            return Ok(params);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no draw met the incoherence limit {limit} in {MAX_REJECTIONS} attempts; reduce kappa"
    )))
}

fn random_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = standard_normal_vec(d, rng);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            scale_in_place(&mut v, 1.0 / n);
            basis.push(v);
        }
    }
    basis
}

/// Sparse parameters on disjoint random supports.
///
/// `s` incoherent vectors `u_1..u_s` in `R^s` are drawn as in
/// [`generate_params_lowdim`]. Column `j` (0-based) lives on support group
/// `j / s` and equals `u_{j mod s}` there, so columns from different groups
/// are exactly orthogonal.
pub fn generate_params_highdim<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    s: usize,
    kappa: f64,
    rng: &mut R,
) -> Result<ParamSet> {
    if s == 0 || k == 0 {
        return Err(Error::InvalidArgument("need s >= 1 and k >= 1".into()));
    }
    let groups = k.div_ceil(s);
    if groups * s > d {
        return Err(Error::InvalidArgument(format!(
            "{groups} disjoint supports of size {s} do not fit in d = {d}"
        )));
    }
    let local = generate_params_lowdim(s, s, kappa, rng)?;
    let mut coords: Vec<usize> = (0..d).collect();
    coords.shuffle(rng);
    let supports: Vec<Vec<usize>> = coords
        .chunks_exact(s)
        .take(groups)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    let columns = (0..k)
        .map(|j| {
            let mut col = vec![0.0; d];
            for (&idx, &val) in supports[j / s].iter().zip(local.column(j % s)) {
                col[idx] = val;
            }
            col
        })
        .collect();
    ParamSet::new(columns, Some(s))
}

/// Draws `n` observations from the model.
pub fn sample_dataset<R: Rng + ?Sized>(spec: &ModelSpec, params: &ParamSet, n: usize, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if params.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: params.dim(),
        });
    }
    if params.k() != spec.k {
        return Err(Error::DimensionMismatch {
            expected: spec.k,
            found: params.k(),
        });
    }
    let d = spec.d;
    let k = spec.k;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let chooser = match spec.model_kind {
        ModelKind::Mixture => Some(
            WeightedIndex::new(&spec.weights)
                .map_err(|e| Error::InvalidArgument(format!("mixing weights: {e}")))?,
        ),
        ModelKind::Discordant => None,
    };
    for _ in 0..n {
        let start = x.len();
        x.extend((0..d).map(|_| -> f64 { rng.sample(StandardNormal) }));
        let row = &x[start..];
        let yi = match &chooser {
            None => {
                let mut total = 0.0;
                for j in 0..k {
                    let eps: f64 = rng.sample(StandardNormal);
                    total += spec.links[j].eval(dot(row, params.column(j))) + spec.noise_sd * eps;
                }
                total / k as f64
            }
            Some(choose) => {
                let j = choose.sample(rng);
                let eps: f64 = rng.sample(StandardNormal);
                spec.links[j].eval(dot(row, params.column(j))) + spec.noise_sd * eps
            }
        };
        y.push(yi);
    }
    Dataset::new(x, y, d)
}

/// `ψ = max_{i≠j} |<β_i, β_j>|`; zero for a single column.
pub fn incoherence(params: &ParamSet) -> f64 {
    let cols = params.columns();
    let mut psi = 0.0f64;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            psi = psi.max(dot(&cols[i], &cols[j]).abs());
        }
    }
    psi
}

pub const GAMMA_QUADRATURE_POINTS: usize = 64;

/// `γ = E[h'''(ξ)]`, evaluated in the Stein form `E[h(ξ)(ξ³ - 3ξ)]` with
/// 64-point Gauss–Hermite quadrature.
pub fn gamma_coefficient(link: LinkKind) -> f64 {
    gamma_with(&GaussHermite::new(GAMMA_QUADRATURE_POINTS), link)
}

fn gamma_with(q: &GaussHermite, link: LinkKind) -> f64 {
    q.expectation(|t| link.eval(t) * (t * t * t - 3.0 * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn links_at_zero() {
        let expect = [0.0, 10.0, 0.0, 0.0];
        for (l, e) in LinkKind::ALL.iter().zip(expect) {
            assert_eq!(l.eval(0.0), e);
        }
        assert_eq!("h1".parse::<LinkKind>().unwrap(), LinkKind::CubicExp);
        assert!("quartic".parse::<LinkKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(ModelKind::Discordant, 0, 1, LinkKind::Cubic).is_err());
        assert!(ModelSpec::new(ModelKind::Discordant, 3, 0, LinkKind::Cubic).is_err());
        let m = ModelSpec::new(ModelKind::Mixture, 3, 2, LinkKind::Cubic).unwrap();
        assert_relative_eq!(m.noise_sd, 0.5f64.sqrt());
        assert!(m.clone().with_weights(vec![0.6, 0.6]).is_err());
        assert!(m.clone().with_weights(vec![1.2, -0.2]).is_err());
        assert!(m.clone().with_noise_sd(-1.0).is_err());
        assert!(m.with_weights(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn lowdim_zero_kappa_is_orthonormal() {
        let p = generate_params_lowdim(10, 4, 0.0, &mut rng(1)).unwrap();
        assert!(incoherence(&p) < 1e-14);
        assert!(generate_params_lowdim(3, 4, 0.1, &mut rng(1)).is_err());
    }

    #[test]
    fn lowdim_incoherence_bound_over_seeds() {
        let limit = INCOHERENCE_REJECTION_CONSTANT / 20f64.sqrt();
        for seed in 0..100 {
            let p = generate_params_lowdim(20, 5, DEFAULT_KAPPA, &mut rng(seed)).unwrap();
            assert!(incoherence(&p) <= limit);
            for c in p.columns() {
                assert!((norm(c) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn highdim_grouping() {
        let p = generate_params_highdim(100, 3, 3, 0.1, &mut rng(2)).unwrap();
        let support = |c: &[f64]| -> Vec<usize> { (0..c.len()).filter(|&i| c[i] != 0.0).collect() };
        assert_eq!(support(p.column(0)), support(p.column(1)));
        assert_eq!(support(p.column(0)), support(p.column(2)));
        assert_eq!(support(p.column(0)).len(), 3);

        let p = generate_params_highdim(100, 7, 3, 0.1, &mut rng(3)).unwrap();
        let s: Vec<Vec<usize>> = p.columns().iter().map(|c| support(c)).collect();
        assert_eq!(s[0], s[2]);
        assert_eq!(s[3], s[5]);
        assert!(s[0].iter().all(|i| !s[3].contains(i)));
        assert!(s[6].iter().all(|i| !s[0].contains(i) && !s[3].contains(i)));
        assert_eq!(dot(p.column(0), p.column(3)), 0.0);
        assert_eq!(dot(p.column(4), p.column(6)), 0.0);
        // Same within-group vector in every group.
        let restricted = |j: usize| -> Vec<f64> { s[j].iter().map(|&i| p.column(j)[i]).collect() };
        assert_eq!(restricted(0), restricted(3));
        assert_eq!(restricted(0), restricted(6));

        assert!(generate_params_highdim(8, 7, 3, 0.1, &mut rng(3)).is_err());
    }

    #[test]
    fn single_index_noiseless_is_exact_cube() {
        let spec = ModelSpec::new(ModelKind::Discordant, 4, 1, LinkKind::Cubic)
            .unwrap()
            .with_noise_sd(0.0)
            .unwrap();
        let params = ParamSet::new(vec![vec![1.0, 0.0, 0.0, 0.0]], None).unwrap();
        let data = sample_dataset(&spec, &params, 50, &mut rng(4)).unwrap();
        for i in 0..data.n() {
            let x1 = data.row(i)[0];
            assert_eq!(data.y()[i], x1 * x1 * x1);
        }
    }

    #[test]
    fn incoherence_examples() {
        let s = 0.5f64.sqrt();
        let p = ParamSet::new(vec![vec![1.0, 0.0], vec![s, s]], None).unwrap();
        assert_relative_eq!(incoherence(&p), s, epsilon = 1e-15);
        let p = ParamSet::new(vec![vec![1.0, 0.0]], None).unwrap();
        assert_eq!(incoherence(&p), 0.0);
        assert!(ParamSet::new(vec![vec![1.0, 1.0]], None).is_err());
        assert!(ParamSet::new(vec![vec![0.6, 0.8, 0.0]], Some(1)).is_err());
    }

    #[test]
    fn gamma_is_six_for_all_links() {
        for l in LinkKind::ALL {
            assert_relative_eq!(gamma_coefficient(l), 6.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ModelSpec::new(ModelKind::Mixture, 6, 3, LinkKind::CubicSin).unwrap();
        let p = generate_params_lowdim(6, 3, 0.1, &mut rng(9)).unwrap();
        let a = sample_dataset(&spec, &p, 100, &mut rng(10)).unwrap();
        let b = sample_dataset(&spec, &p, 100, &mut rng(10)).unwrap();
        assert_eq!(a, b);
    }
}
