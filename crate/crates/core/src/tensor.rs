//! Dense symmetric third-order tensors and the contraction interface shared by
//! dense and implicit (data-backed) moment tensors.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm, random_unit, scale_in_place, sparse_support, truncate_normalize};

/// Anything that can evaluate the bilinear contraction `T(I, u, v)` of a
/// symmetric order-3 tensor.
pub trait TensorOperator: Sync {
    fn dim(&self) -> usize;

    /// `[T(I, u, v)]_i = sum_{j,k} T_ijk u_j v_k`.
    fn contract(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// The cubic form `T(u, u, u)`.
    fn cubic_form(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(u, &self.contract(u, u)?))
    }
}

/// Symmetric tensor in `R^{d x d x d}` stored densely in lexicographic order.
///
/// Every constructor and mutator writes all permutations of an index triple
/// with the same value, so permuted entries are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    dim: usize,
    entries: Vec<f64>,
}

impl SymTensor3 {
    pub fn zeros(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be positive".into()));
        }
        Ok(Self {
            dim: d,
            entries: vec![0.0; d * d * d],
        })
    }

    /// Wraps raw entries, checking length, finiteness and exact symmetry.
    pub fn from_entries(d: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 || entries.len() != d * d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d * d,
                found: entries.len(),
            });
        }
        let t = Self { dim: d, entries };
        if t.entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("tensor entries must be finite".into()));
        }
        if !t.is_symmetric() {
            return Err(Error::InvalidArgument("tensor entries are not symmetric".into()));
        }
        Ok(t)
    }

    /// Caller guarantees symmetry.
    pub(crate) fn from_symmetric_unchecked(d: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), d * d * d);
        Self { dim: d, entries }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[self.index(i, j, k)]
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let v = self.get(i, j, k).to_bits();
                    if permutations(i, j, k)
                        .iter()
                        .any(|&(a, b, c)| self.get(a, b, c).to_bits() != v)
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Writes `value` at every permutation of `(i, j, k)`.
    pub(crate) fn set_symmetric(&mut self, i: usize, j: usize, k: usize, value: f64) {
        for (a, b, c) in permutations(i, j, k) {
            let idx = self.index(a, b, c);
            self.entries[idx] = value;
        }
    }

    /// `T += c * u^{⊗3}`.
    pub fn rank1_accumulate(&mut self, c: f64, u: &[f64]) -> Result<()> {
        check_len(self.dim, u)?;
        if c == 0.0 {
            return Ok(());
        }
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                let cij = c * u[i] * u[j];
                for k in j..d {
                    let updated = self.get(i, j, k) + cij * u[k];
                    self.set_symmetric(i, j, k, updated);
                }
            }
        }
        Ok(())
    }

    pub fn with_rank1(mut self, c: f64, u: &[f64]) -> Result<Self> {
        self.rank1_accumulate(c, u)?;
        Ok(self)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &SymTensor3) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        self.entries
            .iter_mut()
            .zip(&other.entries)
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn sub(&self, other: &SymTensor3) -> Result<SymTensor3> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> SymTensor3 {
        let mut out = self.clone();
        scale_in_place(&mut out.entries, c);
        out
    }

    /// `T(I, u, v)`.
    pub fn contract2(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, u)?;
        check_len(self.dim, v)?;
        let d = self.dim;
        let mut out = vec![0.0; d];
        match (sparse_support(u), sparse_support(v)) {
            (Some(su), Some(sv)) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &j in &su {
                        let row = &self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                        let inner: f64 = sv.iter().map(|&k| row[k] * v[k]).sum();
                        acc += u[j] * inner;
                    }
                    *o = acc;
                }
            }
            _ => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, &uj) in u.iter().enumerate() {
                        if uj == 0.0 {
                            continue;
                        }
                        let row = &self.entries[(i * d + j) * d..(i * d + j + 1) * d];
                        acc += uj * dot(row, v);
                    }
                    *o = acc;
                }
            }
        }
        Ok(out)
    }

    /// `<T, u ⊗ v ⊗ w> = u · T(I, v, w)`.
    pub fn eval3(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
        check_len(self.dim, u)?;
        Ok(dot(u, &self.contract2(v, w)?))
    }

    /// Writes the unique entries `i <= j <= k` as CSV rows `i,j,k,value`
    /// (0-based indices, header included).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "i,j,k,value")?;
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    writeln!(w, "{i},{j},{k},{}", self.get(i, j, k))?;
                }
            }
        }
        Ok(())
    }
}

impl TensorOperator for SymTensor3 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contract(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.contract2(u, v)
    }
}

pub(crate) fn permutations(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ]
}

/// Default restart count for operator-norm estimation.
pub const DEFAULT_NORM_RESTARTS: usize = 50;
/// Default power iterations per restart for operator-norm estimation.
pub const DEFAULT_NORM_ITERS: usize = 100;

/// Lower bound on `sup_{‖u‖=1} |T(u,u,u)|` by multi-restart power iteration.
///
/// The value is the largest `|T(u,u,u)|` seen along any iterate path.
pub fn operator_norm_estimate<T, R>(t: &T, restarts: usize, iters: usize, rng: &mut R) -> Result<f64>
where
    T: TensorOperator + ?Sized,
    R: Rng + ?Sized,
{
    check_restarts(restarts, iters)?;
    let d = t.dim();
    let starts: Vec<Vec<f64>> = (0..restarts).map(|_| random_unit(d, rng)).collect();
    max_over_paths(t, starts, iters, None)
}

/// Lower bound on the r-sparse operator norm `sup |T(u,u,u)|` over unit `u`
/// with at most `r` nonzeros, by truncated power iteration.
pub fn sparse_operator_norm_estimate<T, R>(
    t: &T,
    r: usize,
    restarts: usize,
    iters: usize,
    rng: &mut R,
) -> Result<f64>
where
    T: TensorOperator + ?Sized,
    R: Rng + ?Sized,
{
    check_restarts(restarts, iters)?;
    let d = t.dim();
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "sparsity r = {r} must lie in [1, {d}]"
        )));
    }
    let starts = (0..restarts)
        .map(|_| truncate_normalize(&random_unit(d, rng), r))
        .collect::<Result<Vec<_>>>()?;
    max_over_paths(t, starts, iters, Some(r))
}

fn check_restarts(restarts: usize, iters: usize) -> Result<()> {
    if restarts == 0 || iters == 0 {
        return Err(Error::InvalidArgument(
            "restarts and iterations must be at least 1".into(),
        ));
    }
    Ok(())
}

fn max_over_paths<T>(t: &T, starts: Vec<Vec<f64>>, iters: usize, truncation: Option<usize>) -> Result<f64>
where
    T: TensorOperator + ?Sized,
{
    let best = starts
        .into_par_iter()
        .map(|u| path_max(t, u, iters, truncation))
        .collect::<Result<Vec<f64>>>()?;
    Ok(best.into_iter().fold(0.0, f64::max))
}

fn path_max<T>(t: &T, mut u: Vec<f64>, iters: usize, truncation: Option<usize>) -> Result<f64>
where
    T: TensorOperator + ?Sized,
{
    let mut best = 0.0f64;
    for step in 0..=iters {
        let c = t.contract(&u, &u)?;
        best = best.max(dot(&u, &c).abs());
        if step == iters {
            break;
        }
        let nc = norm(&c);
        if !(nc > f64::MIN_POSITIVE) {
            break;
        }
        u = match truncation {
            Some(r) => truncate_normalize(&c, r)?,
            None => {
                let mut next = c;
                scale_in_place(&mut next, 1.0 / nc);
                next
            }
        };
    }
    Ok(best)
}

/// Brute-force reference evaluations (oracle mode). Cost grows exponentially
/// with dimension; intended for small verification problems only.
pub mod oracle {
    use super::*;

    /// `max |T(u,u,u)|` over a dense spherical grid, for `d <= 3`.
    ///
    /// `points_per_angle` samples are taken along each spherical angle; the
    /// antipodal symmetry `|T(-u)| = |T(u)|` halves the polar range.
    pub fn grid_operator_norm(t: &SymTensor3, points_per_angle: usize) -> Result<f64> {
        let d = t.dim();
        let g = points_per_angle.max(1);
        match d {
            1 => Ok(t.get(0, 0, 0).abs()),
            2 => {
                let c = unique_coefficients(t, &[0, 1]);
                Ok((0..g)
                    .map(|a| {
                        let th = std::f64::consts::PI * a as f64 / g as f64;
                        cubic_poly(&c, &[th.cos(), th.sin()]).abs()
                    })
                    .fold(0.0, f64::max))
            }
            3 => {
                let c = unique_coefficients(t, &[0, 1, 2]);
                Ok(hemisphere_max(&c, g, g))
            }
            _ => Err(Error::InvalidArgument(format!(
                "grid oracle supports d <= 3, got {d}"
            ))),
        }
    }

    /// Exact-mode r-sparse operator norm for `d <= 12`, `r <= 3`: every
    /// support of size `r` is enumerated and its unit sphere grid-searched,
    /// then the best grid point is polished by power iteration restricted to
    /// that support.
    pub fn sparse_operator_norm_exhaustive(
        t: &SymTensor3,
        r: usize,
        points_per_angle: usize,
    ) -> Result<f64> {
        let d = t.dim();
        if d > 12 || r == 0 || r > 3 || r > d {
            return Err(Error::InvalidArgument(format!(
                "exhaustive mode needs d <= 12 and 1 <= r <= min(3, d); got d = {d}, r = {r}"
            )));
        }
        let g = points_per_angle.max(1);
        let mut best = 0.0f64;
        for support in combinations(d, r) {
            let c = unique_coefficients(t, &support);
            let (val, arg) = match r {
                1 => (c[0].abs(), vec![1.0]),
                2 => (0..g)
                    .map(|a| {
                        let th = std::f64::consts::PI * a as f64 / g as f64;
                        let u = vec![th.cos(), th.sin()];
                        (cubic_poly(&c, &u).abs(), u)
                    })
                    .fold((f64::NEG_INFINITY, vec![]), |acc, x| if x.0 > acc.0 { x } else { acc }),
                _ => hemisphere_argmax(&c, g, 2 * g),
            };
            best = best.max(val);
            best = best.max(polish(t, &support, arg, 200)?);
        }
        Ok(best)
    }

    fn polish(t: &SymTensor3, support: &[usize], local: Vec<f64>, iters: usize) -> Result<f64> {
        let d = t.dim();
        let mut u = vec![0.0; d];
        for (&s, &x) in support.iter().zip(&local) {
            u[s] = x;
        }
        let mut best = 0.0f64;
        for _ in 0..iters {
            let c = t.contract2(&u, &u)?;
            best = best.max(dot(&u, &c).abs());
            let mut next = vec![0.0; d];
            for &s in support {
                next[s] = c[s];
            }
            let nn = norm(&next);
            if !(nn > f64::MIN_POSITIVE) {
                break;
            }
            scale_in_place(&mut next, 1.0 / nn);
            u = next;
        }
        Ok(best)
    }

    fn combinations(d: usize, r: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, d: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == r {
                out.push(cur.clone());
                return;
            }
            for i in start..d {
                cur.push(i);
                rec(i + 1, d, r, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, d, r, &mut Vec::with_capacity(r), &mut out);
        out
    }

    /// Coefficients of the cubic form restricted to `support`, as
    /// `(multiplicity * T_abc, a, b, c)` over sorted local triples.
    fn unique_coefficients(t: &SymTensor3, support: &[usize]) -> Vec<f64> {
        let m = support.len();
        let mut out = Vec::new();
        for a in 0..m {
            for b in a..m {
                for c in b..m {
                    let mult = match (a == b, b == c) {
                        (true, true) => 1.0,
                        (false, false) => 6.0,
                        _ => 3.0,
                    };
                    out.push(mult * t.get(support[a], support[b], support[c]));
                }
            }
        }
        out
    }

    fn cubic_poly(c: &[f64], u: &[f64]) -> f64 {
        let m = u.len();
        let mut idx = 0;
        let mut acc = 0.0;
        for a in 0..m {
            for b in a..m {
                let uab = u[a] * u[b];
                for cc in b..m {
                    acc += c[idx] * uab * u[cc];
                    idx += 1;
                }
            }
        }
        acc
    }

    fn hemisphere_max(c: &[f64], polar: usize, azimuth: usize) -> f64 {
        (0..=polar)
            .into_par_iter()
            .map(|a| {
                let th = 0.5 * std::f64::consts::PI * a as f64 / polar as f64;
                let (st, ct) = th.sin_cos();
                (0..azimuth)
                    .map(|b| {
                        let ph = 2.0 * std::f64::consts::PI * b as f64 / azimuth as f64;
                        let (sp, cp) = ph.sin_cos();
                        cubic_poly(c, &[st * cp, st * sp, ct]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    fn hemisphere_argmax(c: &[f64], polar: usize, azimuth: usize) -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, vec![0.0, 0.0, 1.0]);
        for a in 0..=polar {
            let th = 0.5 * std::f64::consts::PI * a as f64 / polar as f64;
            let (st, ct) = th.sin_cos();
            for b in 0..azimuth {
                let ph = 2.0 * std::f64::consts::PI * b as f64 / azimuth as f64;
                let (sp, cp) = ph.sin_cos();
                let u = [st * cp, st * sp, ct];
                let v = cubic_poly(c, &u).abs();
                if v > best.0 {
                    best = (v, u.to_vec());
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn diag(coeffs: &[f64]) -> SymTensor3 {
        let d = coeffs.len();
        let mut t = SymTensor3::zeros(d).unwrap();
        for (i, &c) in coeffs.iter().enumerate() {
            t.rank1_accumulate(c, &e(d, i)).unwrap();
        }
        t
    }

    #[test]
    fn zeros_shapes_and_errors() {
        assert_eq!(SymTensor3::zeros(1).unwrap().entries(), &[0.0]);
        assert_eq!(SymTensor3::zeros(3).unwrap().entries().len(), 27);
        assert!(SymTensor3::zeros(0).is_err());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let z = SymTensor3::zeros(4).unwrap();
        assert_eq!(operator_norm_estimate(&z, 5, 5, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn rank1_accumulate_examples() {
        let t = diag(&[6.0, 0.0]);
        assert_eq!(t.get(0, 0, 0), 6.0);
        assert_eq!(t.entries().iter().filter(|x| **x != 0.0).count(), 1);

        let before = t.clone();
        let mut t2 = t.clone();
        t2.rank1_accumulate(0.0, &[0.3, 0.4]).unwrap();
        assert_eq!(t2, before);

        let s = 0.5f64.sqrt();
        let t3 = SymTensor3::zeros(2).unwrap().with_rank1(1.0, &[s, s]).unwrap();
        for &x in t3.entries() {
            assert_relative_eq!(x, 2f64.powf(-1.5), epsilon = 1e-15);
        }
        assert!(SymTensor3::zeros(2).unwrap().with_rank1(1.0, &[1.0]).is_err());
    }

    #[test]
    fn contract2_examples() {
        let b = [0.6, 0.0, 0.8];
        let t = SymTensor3::zeros(3).unwrap().with_rank1(1.0, &b).unwrap();
        let out = t.contract2(&b, &b).unwrap();
        for (o, x) in out.iter().zip(b) {
            assert_relative_eq!(*o, x, epsilon = 1e-15);
        }

        let t = diag(&[6.0, 5.0]);
        let s = 0.5f64.sqrt();
        let out = t.contract2(&[s, s], &[s, s]).unwrap();
        assert_relative_eq!(out[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(out[1], 2.5, epsilon = 1e-14);

        assert_eq!(t.contract2(&[0.0, 0.0], &[s, s]).unwrap(), vec![0.0, 0.0]);
        assert!(t.contract2(&[1.0], &[s, s]).is_err());
    }

    #[test]
    fn eval3_examples() {
        let t = diag(&[6.0, 0.0]);
        assert_eq!(t.eval3(&e(2, 0), &e(2, 0), &e(2, 0)).unwrap(), 6.0);
        assert_eq!(t.eval3(&e(2, 1), &e(2, 1), &e(2, 1)).unwrap(), 0.0);
        let t = diag(&[6.0, 5.0]);
        let s = [0.5f64.sqrt(); 2];
        assert_relative_eq!(t.eval3(&s, &s, &s).unwrap(), 3.889087296526011, epsilon = 1e-12);
    }

    #[test]
    fn norm_estimates_on_diagonal_tensors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = diag(&[6.0, 0.0, 0.0]);
        assert_relative_eq!(operator_norm_estimate(&t, 10, 50, &mut rng).unwrap(), 6.0, epsilon = 1e-12);

        let t = diag(&[6.0, 5.0]);
        let grid = oracle::grid_operator_norm(&t, 10_000).unwrap();
        assert_relative_eq!(grid, 6.0, epsilon = 1e-9);
        let est = operator_norm_estimate(&t, DEFAULT_NORM_RESTARTS, DEFAULT_NORM_ITERS, &mut rng).unwrap();
        assert_relative_eq!(est, grid, epsilon = 1e-9);

        let t = diag(&[6.0, 5.0, 4.0]);
        let exact = oracle::sparse_operator_norm_exhaustive(&t, 1, 10).unwrap();
        assert_eq!(exact, 6.0);
        let est = sparse_operator_norm_estimate(&t, 1, 20, 20, &mut rng).unwrap();
        assert_relative_eq!(est, 6.0, epsilon = 1e-12);

        let z = SymTensor3::zeros(5).unwrap();
        for r in 1..=5 {
            assert_eq!(sparse_operator_norm_estimate(&z, r, 4, 4, &mut rng).unwrap(), 0.0);
        }
        assert!(sparse_operator_norm_estimate(&t, 0, 4, 4, &mut rng).is_err());
        assert!(sparse_operator_norm_estimate(&t, 4, 4, 4, &mut rng).is_err());
        assert!(operator_norm_estimate(&t, 0, 4, &mut rng).is_err());
    }

    #[test]
    fn csv_lists_unique_sorted_entries() {
        let t = diag(&[6.0, 5.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "i,j,k,value\n0,0,0,6\n0,0,1,0\n0,1,1,0\n1,1,1,5\n");
    }

    #[test]
    fn from_entries_rejects_asymmetry() {
        let mut entries = vec![0.0; 8];
        entries[1] = 1.0; // (0,0,1) without its permutations
        assert!(SymTensor3::from_entries(2, entries).is_err());
        assert!(SymTensor3::from_entries(2, vec![f64::NAN; 8]).is_err());
    }
}
