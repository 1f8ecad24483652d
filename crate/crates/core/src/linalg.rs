//! Small dense vector kernels shared by the tensor and estimation code.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale_in_place(a: &mut [f64], c: f64) {
    a.iter_mut().for_each(|x| *x *= c);
}

/// Draws a vector uniformly from the unit sphere in `d` dimensions.
pub fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm(&v);
        if nv > 0.0 && nv.is_finite() {
            scale_in_place(&mut v, 1.0 / nv);
            return v;
        }
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Indices of the nonzero coordinates, or `None` when the vector is mostly dense.
pub(crate) fn sparse_support(v: &[f64]) -> Option<Vec<usize>> {
    let nnz = v.iter().filter(|x| **x != 0.0).count();
    if 2 * nnz >= v.len() {
        return None;
    }
    Some(
        v.iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect(),
    )
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Keeps the `s` largest-magnitude coordinates (ties go to the lower index),
/// zeroes the rest and normalizes.
pub fn truncate_normalize(u: &[f64], s: usize) -> crate::Result<Vec<f64>> {
    use crate::Error;
    let d = u.len();
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(format!(
            "truncation level {s} must lie in [1, {d}]"
        )));
    }
    let mut out = vec![0.0; d];
    if s == d {
        out.copy_from_slice(u);
    } else {
        let mut order: Vec<usize> = (0..d).collect();
        let by_magnitude = |a: &usize, b: &usize| u[*b].abs().total_cmp(&u[*a].abs()).then(a.cmp(b));
        order.select_nth_unstable_by(s - 1, by_magnitude);
        for &i in &order[..s] {
            out[i] = u[i];
        }
    }
    let n = norm(&out);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(
            "cannot normalize an all-zero vector".into(),
        ));
    }
    scale_in_place(&mut out, 1.0 / n);
    Ok(out)
}
