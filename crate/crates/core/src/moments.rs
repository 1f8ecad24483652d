//! Empirical third-order moment tensors `M̂ = (1/n) Σ_i y_i S₃(x_i)`.
//!
//! The same formula serves discordant and mixture data; only the way `y` was
//! generated differs. Two representations are provided:
//!
//! * [`build_moment_tensor_dense`] materializes all `d³` entries.
//! * [`ImplicitMoment`] keeps a reference to the data and evaluates
//!   `M̂(I, u, v)` in `O(nd)` without forming the tensor.
//!
//! The dense build uses the expansion
//! `M̂_abc = (1/n) Σ y x_a x_b x_c - δ_bc m_a - δ_ac m_b - δ_ab m_c` with
//! `m = (1/n) Σ y x`, so each entry is a plain sum over samples taken in
//! sample order regardless of how the work is split.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::dot;
use crate::models::{Dataset, ParamSet};
use crate::tensor::{operator_norm_estimate, sparse_operator_norm_estimate, SymTensor3, TensorOperator};

/// Largest dimension accepted by the dense builders.
pub const DENSE_DIM_LIMIT: usize = 512;

const SAMPLE_BLOCK: usize = 256;

pub fn build_moment_tensor_dense(data: &Dataset) -> Result<SymTensor3> {
    guard(data.dim())?;
    Ok(hermite_moment(data.x(), data.y(), data.dim(), false))
}

/// Same result as [`build_moment_tensor_dense`], bit for bit, with the
/// leading tensor index split across threads.
pub fn build_moment_tensor_dense_parallel(data: &Dataset) -> Result<SymTensor3> {
    guard(data.dim())?;
    Ok(hermite_moment(data.x(), data.y(), data.dim(), true))
}

fn guard(d: usize) -> Result<()> {
    if d > DENSE_DIM_LIMIT {
        return Err(Error::TooLarge {
            d,
            limit: DENSE_DIM_LIMIT,
        });
    }
    Ok(())
}

/// `(1/n) Σ_s y_s S₃(x_s)` for row-major `x` (`n × d`).
pub(crate) fn hermite_moment(x: &[f64], y: &[f64], d: usize, parallel: bool) -> SymTensor3 {
    let n = y.len();
    debug_assert_eq!(x.len(), n * d);
    let mut cubic = vec![0.0; d * d * d];
    if parallel {
        cubic
            .par_chunks_mut(d * d)
            .enumerate()
            .for_each(|(i, slab)| accumulate_slab(i, slab, x, y, d));
    } else {
        for (i, slab) in cubic.chunks_mut(d * d).enumerate() {
            accumulate_slab(i, slab, x, y, d);
        }
    }

    let nf = n as f64;
    let mut first = vec![0.0; d];
    for (row, &ys) in x.chunks_exact(d).zip(y) {
        first.iter_mut().zip(row).for_each(|(m, xa)| *m += ys * xa);
    }
    first.iter_mut().for_each(|m| *m /= nf);

    let mut t = SymTensor3::from_symmetric_unchecked(d, vec![0.0; d * d * d]);
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                let mut corr = 0.0;
                if b == c {
                    corr += first[a];
                }
                if a == c {
                    corr += first[b];
                }
                if a == b {
                    corr += first[c];
                }
                let value = cubic[(a * d + b) * d + c] / nf - corr;
                t.set_symmetric(a, b, c, value);
            }
        }
    }
    t
}

/// Fills `slab[b*d + c] = Σ_s y_s x_sa x_sb x_sc` for `a <= b <= c`.
fn accumulate_slab(a: usize, slab: &mut [f64], x: &[f64], y: &[f64], d: usize) {
    let n = y.len();
    let mut start = 0;
    while start < n {
        let end = (start + SAMPLE_BLOCK).min(n);
        for b in a..d {
            let row = &mut slab[b * d + b..(b + 1) * d];
            for s in start..end {
                let xs = &x[s * d..(s + 1) * d];
                let coef = y[s] * xs[a] * xs[b];
                for (r, xc) in row.iter_mut().zip(&xs[b..]) {
                    *r += coef * xc;
                }
            }
        }
        start = end;
    }
}

/// The data viewed as the tensor operator `u, v ↦ M̂(I, u, v)`.
#[derive(Debug, Clone)]
pub struct ImplicitMoment<'a> {
    data: &'a Dataset,
    /// `(1/n) Σ y_i x_i`
    first_moment: Vec<f64>,
}

impl<'a> ImplicitMoment<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let d = data.dim();
        let mut m = vec![0.0; d];
        for (row, &ys) in data.x().chunks_exact(d).zip(data.y()) {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += ys * b);
        }
        let nf = data.n() as f64;
        m.iter_mut().for_each(|a| *a /= nf);
        Self {
            data,
            first_moment: m,
        }
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    /// `(1/n) Σ y [(xᵀu)(xᵀv) x - (uᵀv) x - (xᵀu) v - (xᵀv) u]`.
    pub fn implicit_contract(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let d = self.data.dim();
        check_len(d, u)?;
        check_len(d, v)?;
        let mut out = vec![0.0; d];
        let mut y_xu = 0.0;
        let mut y_xv = 0.0;
        for (row, &ys) in self.data.x().chunks_exact(d).zip(self.data.y()) {
            let xu = dot(row, u);
            let xv = dot(row, v);
            let w = ys * xu * xv;
            out.iter_mut().zip(row).for_each(|(o, xa)| *o += w * xa);
            y_xu += ys * xu;
            y_xv += ys * xv;
        }
        let nf = self.data.n() as f64;
        let uv = dot(u, v);
        for a in 0..d {
            out[a] = out[a] / nf - uv * self.first_moment[a] - (y_xu / nf) * v[a] - (y_xv / nf) * u[a];
        }
        Ok(out)
    }
}

impl TensorOperator for ImplicitMoment<'_> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn contract(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.implicit_contract(u, v)
    }
}

/// `Σ_j w_j γ_j β_j^{⊗3}`, the population value of `E[Y·S₃(X)]`.
pub fn population_tensor(params: &ParamSet, gammas: &[f64], weights: &[f64]) -> Result<SymTensor3> {
    let k = params.k();
    if gammas.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: gammas.len(),
        });
    }
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: weights.len(),
        });
    }
    let mut t = SymTensor3::zeros(params.dim())?;
    for ((col, g), w) in params.columns().iter().zip(gammas).zip(weights) {
        t.rank1_accumulate(w * g, col)?;
    }
    Ok(t)
}

/// Operator norm (or `r`-sparse operator norm) estimate of
/// `empirical - population`.
pub fn moment_error_norm<R: Rng + ?Sized>(
    empirical: &SymTensor3,
    population: &SymTensor3,
    r: Option<usize>,
    restarts: usize,
    iters: usize,
    rng: &mut R,
) -> Result<f64> {
    let diff = empirical.sub(population)?;
    match r {
        Some(r) => sparse_operator_norm_estimate(&diff, r, restarts, iters, rng),
        None => operator_norm_estimate(&diff, restarts, iters, rng),
    }
}
