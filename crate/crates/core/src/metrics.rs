//! Estimation-error metrics, rate axes and diagnostic bound formulas.

use crate::error::{Error, Result};
use crate::models::ParamSet;

/// `min(‖u1 - u2‖, ‖u1 + u2‖)` for unit vectors.
pub fn sign_flip_distance(u1: &[f64], u2: &[f64]) -> Result<f64> {
    if u1.len() != u2.len() {
        return Err(Error::DimensionMismatch {
            expected: u1.len(),
            found: u2.len(),
        });
    }
    for u in [u1, u2] {
        let n = crate::linalg::norm(u);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnit(n));
        }
    }
    Ok(sign_flip_distance_unchecked(u1, u2))
}

pub(crate) fn sign_flip_distance_unchecked(u1: &[f64], u2: &[f64]) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in u1.iter().zip(u2) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    minus.min(plus).sqrt()
}

pub const MAX_MATCHING_K: usize = 10;

/// `min_σ max_j d(β̂_σ(j), β_j)` over all bijections σ, by exhaustive search.
pub fn matching_error(estimates: &[Vec<f64>], truth: &ParamSet) -> Result<f64> {
    let k = truth.k();
    if estimates.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: estimates.len(),
        });
    }
    if k > MAX_MATCHING_K {
        return Err(Error::InvalidArgument(format!(
            "matching is exhaustive; k = {k} exceeds {MAX_MATCHING_K}"
        )));
    }
    let mut cost = vec![vec![0.0; k]; k];
    for (i, est) in estimates.iter().enumerate() {
        for j in 0..k {
            cost[i][j] = sign_flip_distance(est, truth.column(j))?;
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; k];
    assign(&cost, 0, 0.0, &mut used, &mut best);
    Ok(best)
}

fn assign(cost: &[Vec<f64>], row: usize, current: f64, used: &mut [bool], best: &mut f64) {
    if current >= *best {
        return;
    }
    if row == cost.len() {
        *best = current;
        return;
    }
    for j in 0..cost.len() {
        if !used[j] {
            used[j] = true;
            assign(cost, row + 1, current.max(cost[row][j]), used, best);
            used[j] = false;
        }
    }
}

/// `max(√(d/n), d^{5/2}/n)`.
pub fn inverse_signal_strength_lowdim(d: f64, n: f64) -> f64 {
    (d / n).sqrt().max(d.powf(2.5) / n)
}

/// `max(√(s log d / n), (s log d)^{5/2} / n)` with the natural logarithm.
pub fn inverse_signal_strength_highdim(s: f64, d: f64, n: f64) -> f64 {
    sparse_axis(s * d.ln(), n)
}

/// Variant of [`inverse_signal_strength_highdim`] with `log(d/r)` in place of
/// `log d`.
pub fn inverse_signal_strength_highdim_log_ratio(s: f64, d: f64, r: f64, n: f64) -> f64 {
    sparse_axis(s * (d / r).ln(), n)
}

fn sparse_axis(effective_dim: f64, n: f64) -> f64 {
    (effective_dim / n).sqrt().max(effective_dim.powf(2.5) / n)
}

/// Uncalibrated default for the absolute constant in
/// [`theoretical_error_bound`].
pub const DEFAULT_BOUND_CONSTANT: f64 = 1.0;

/// `(2√5/γ_min)·tensor_error + (2√5·C₁·γ_max/γ_min)·√k·ψ²`.
///
/// A diagnostic only: `C₁` is an unknown absolute constant, so the value is
/// not a certified bound.
pub fn theoretical_error_bound(
    tensor_error: f64,
    gamma_min: f64,
    gamma_max: f64,
    k: usize,
    psi: f64,
    c1: f64,
) -> Result<f64> {
    if !(gamma_min > 0.0) {
        return Err(Error::InvalidArgument("gamma_min must be positive".into()));
    }
    let lead = 2.0 * 5f64.sqrt() / gamma_min;
    Ok(lead * tensor_error + lead * c1 * gamma_max * (k as f64).sqrt() * psi * psi)
}

/// Upper envelope line `y <= a·x + b` for a point cloud.
///
/// Among all lines lying on or above every point, returns the one with the
/// least total vertical gap `Σ (a·x_i + b - y_i)`, i.e. the upper convex hull
/// edge above the mean of `x`. When all `x` coincide the line is flat.
pub fn upper_envelope_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points to fit".into()));
    }
    let n = points.len() as f64;
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ymax = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    // The flat line is always feasible.
    let mut best = (0.0, ymax, ymax);
    for (i, &(x1, y1)) in points.iter().enumerate() {
        for &(x2, y2) in &points[i + 1..] {
            if x1 == x2 {
                continue;
            }
            let a = (y2 - y1) / (x2 - x1);
            let b = points
                .iter()
                .map(|&(x, y)| y - a * x)
                .fold(f64::NEG_INFINITY, f64::max);
            let level = a * xbar + b;
            if level < best.2 {
                best = (a, b, level);
            }
        }
    }
    Ok((best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sign_flip_examples() {
        let u = [0.6, 0.8];
        assert_eq!(sign_flip_distance(&u, &u).unwrap(), 0.0);
        assert_eq!(sign_flip_distance(&u, &[-0.6, -0.8]).unwrap(), 0.0);
        assert_relative_eq!(sign_flip_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt());
        assert!(sign_flip_distance(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(sign_flip_distance(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn matching_examples() {
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        let truth = ParamSet::new(vec![e(0), e(1)], None).unwrap();
        let est = vec![vec![0.0, -1.0, 0.0], e(0)];
        assert_eq!(matching_error(&est, &truth).unwrap(), 0.0);

        let truth1 = ParamSet::new(vec![vec![0.6, 0.8, 0.0]], None).unwrap();
        let est1 = vec![e(0)];
        assert_eq!(
            matching_error(&est1, &truth1).unwrap(),
            sign_flip_distance(&est1[0], truth1.column(0)).unwrap()
        );

        let truth = ParamSet::new(vec![e(0), e(2)], None).unwrap();
        assert_relative_eq!(matching_error(&[e(0), e(1)], &truth).unwrap(), 2f64.sqrt());
        assert!(matching_error(&[e(0)], &truth).is_err());
    }

    #[test]
    fn rate_axes() {
        assert_relative_eq!(inverse_signal_strength_lowdim(20.0, 1e5), 0.0178885438, epsilon = 1e-9);
        assert_eq!(inverse_signal_strength_lowdim(1.0, 1.0), 1.0);
        assert!(inverse_signal_strength_lowdim(20.0, 1e300) < 1e-100);
        let s_log_d = 3.0 * 100f64.ln();
        assert_relative_eq!(
            inverse_signal_strength_highdim(3.0, 100.0, 1e5),
            (s_log_d / 1e5).sqrt().max(s_log_d.powf(2.5) / 1e5)
        );
        assert!(
            inverse_signal_strength_highdim_log_ratio(3.0, 100.0, 9.0, 1e5)
                < inverse_signal_strength_highdim(3.0, 100.0, 1e5)
        );
    }

    #[test]
    fn bound_formula() {
        let lead = 2.0 * 5f64.sqrt() / 6.0;
        assert_relative_eq!(theoretical_error_bound(0.1, 6.0, 6.0, 4, 0.0, 7.0).unwrap(), lead * 0.1);
        assert_eq!(theoretical_error_bound(0.0, 6.0, 6.0, 4, 0.0, 1.0).unwrap(), 0.0);
        let v = theoretical_error_bound(0.1, 6.0, 6.0, 4, 0.05, 1.0).unwrap();
        assert_relative_eq!(v, 0.0745356 + 0.0223607, epsilon = 1e-6);
        assert_relative_eq!(v, 0.0968963, epsilon = 1e-6);
        assert!(theoretical_error_bound(0.1, 0.0, 6.0, 4, 0.05, 1.0).is_err());
    }

    #[test]
    fn envelope_covers_points() {
        let pts = [(0.1, 0.3), (0.2, 0.5), (0.3, 0.6), (0.2, 0.2)];
        let (a, b) = upper_envelope_fit(&pts).unwrap();
        for (x, y) in pts {
            assert!(y <= a * x + b + 1e-12);
        }
        // hull edge above x̄ = 0.2 is the segment (0.1,0.3)-(0.2,0.5) or (0.2,0.5)-(0.3,0.6)
        assert_relative_eq!(a * 0.2 + b, 0.5, epsilon = 1e-12);
        assert_eq!(upper_envelope_fit(&[(1.0, 2.0), (1.0, 3.0)]).unwrap(), (0.0, 3.0));
    }
}
