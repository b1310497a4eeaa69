//! Gauss–Hermite rules for expectations under a normal distribution.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default number of nodes.
pub const DEFAULT_ORDER: usize = 20;

/// Nodes and weights with `Σ w_k g(x_k) ≈ E[g(Z)]`, `Z ~ N(0, 1)`.
///
/// Built by Golub–Welsch on the Jacobi matrix of the probabilists' Hermite
/// polynomials. Nodes are sorted ascending and the weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::BadParams("quadrature order must be positive".into()));
        }
        let mut jacobi = DMatrix::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize: the rule is exactly symmetric about zero.
        for k in 0..order / 2 {
            let j = order - 1 - k;
            let x = 0.5 * (pairs[j].0 - pairs[k].0);
            let w = 0.5 * (pairs[j].1 + pairs[k].1);
            pairs[k] = (-x, w);
            pairs[j] = (x, w);
        }
        if order % 2 == 1 {
            pairs[order / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(X)]` for `X ~ N(mean, sd²)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(mean + sd * x))
            .sum()
    }
}
