//! Gauss–Hermite quadrature for expectations under a standard normal.

use std::f64::consts::PI;

/// Nodes and weights such that `E[f(ξ)] ≈ Σ w_i f(x_i)` for `ξ ~ N(0, 1)`.
///
/// Nodes are stored in symmetric pairs `(x, -x)` with identical weights so
/// odd integrands cancel exactly.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule (`n` even) by Newton iteration on the
    /// orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n.is_multiple_of(2), "rule size must be even and >= 2");
        let half = n / 2;
        let pim4 = PI.powf(-0.25);
        let mut pos: Vec<(f64, f64)> = Vec::with_capacity(half);
        let mut z = 0.0f64;
        for i in 0..half {
            // Initial guesses for the largest roots first, then deflate inward.
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * pos[0].0,
                3 => 1.91 * z - 0.91 * pos[1].0,
                _ => 2.0 * z - pos[i - 2].0,
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            pos.push((z, 2.0 / (pp * pp)));
        }
        // Physicists' rule (weight e^{-x^2}) mapped to the standard normal.
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &(x, w) in &pos {
            let (xn, wn) = (x * 2f64.sqrt(), w / PI.sqrt());
            nodes.push(xn);
            weights.push(wn);
            nodes.push(-xn);
            weights.push(wn);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(ξ)]`, summing each symmetric pair before weighting.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .chunks_exact(2)
            .zip(self.weights.chunks_exact(2))
            .map(|(x, w)| w[0] * (f(x[0]) + f(x[1])))
            .sum()
    }
}
