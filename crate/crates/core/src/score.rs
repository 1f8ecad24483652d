//! Score functions of the standard Gaussian density.
//!
//! `S₁(x) = x`, `S₂(x) = xxᵀ - I` and
//! `S₃(x)_abc = x_a x_b x_c - x_a δ_bc - x_b δ_ac - x_c δ_ab`, the
//! multivariate Hermite polynomials. With these signs Stein's identity reads
//! `E[f(X) S_l(X)] = E[∇^l f(X)]`.

use crate::error::{check_len, Result};
use crate::linalg::dot;
use crate::moments::hermite_moment;
use crate::tensor::SymTensor3;

pub fn score1(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// `xxᵀ - I`, returned as rows.
pub fn score2(x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| x[i] * x[j] - if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Dense `S₃(x)`. Panics on an empty `x`.
pub fn score3(x: &[f64]) -> SymTensor3 {
    assert!(!x.is_empty(), "score3 needs d >= 1");
    hermite_moment(x, &[1.0], x.len(), false)
}

/// `S₃(x)(I, u, u) = (xᵀu)² x - ‖u‖² x - 2 (xᵀu) u`, without forming `S₃(x)`.
pub fn score3_contract(x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), u)?;
    let xu = dot(x, u);
    let uu = dot(u, u);
    Ok(x.iter()
        .zip(u)
        .map(|(xa, ua)| xu * xu * xa - uu * xa - 2.0 * xu * ua)
        .collect())
}
