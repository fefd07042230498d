//! Gauss-Hermite rules for integrating against a standard normal density.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1), i.e. the physicists' rule
/// with nodes scaled by sqrt(2) and weights divided by sqrt(pi).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule. Eigenvalues of the Jacobi matrix give the
    /// starting nodes; Newton steps on the orthonormal Hermite recurrence
    /// polish them and yield weights with full relative accuracy.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let nf = n as f64;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut start: Vec<f64> = SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        start.sort_by(|a, b| b.total_cmp(a));

        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..m {
            let mut z = start[i];
            let mut pp = 0.0;
            for _ in 0..20 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
        // ascending nodes
        nodes.reverse();
        weights.reverse();
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Approximates E[f(Z)] for standard normal Z.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}
