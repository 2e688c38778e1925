use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::graph::EmbeddingMatrix;

/// `softplus(x) = ln(1 + eˣ)`, evaluated without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`]: `ln(eˢ - 1)`.
pub fn softplus_inv(s: f64) -> f64 {
    s + (-(-s).exp()).ln_1p()
}

/// Per-node diagonal Gaussian `q(e) = N(μ, Diag(s))`, `s = softplus(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub mu: EmbeddingMatrix,
    pub rho: EmbeddingMatrix,
}

impl VariationalParams {
    /// All-zero `μ` and `ρ`, so every scale starts at `ln 2`.
    pub fn zeros(num_users: usize, num_items: usize, dim: usize) -> Self {
        let n = num_users + num_items;
        Self {
            mu: EmbeddingMatrix::zeros(dim, n),
            rho: EmbeddingMatrix::zeros(dim, n),
        }
    }

    pub fn new(mu: EmbeddingMatrix, rho: EmbeddingMatrix) -> Result<Self> {
        mu.ensure_same_shape(&rho, "mu and rho")?;
        Ok(Self { mu, rho })
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn num_nodes(&self) -> usize {
        self.mu.num_nodes()
    }

    pub fn scales(&self) -> EmbeddingMatrix {
        let mut s = self.rho.clone();
        s.as_mut_slice().iter_mut().for_each(|v| *v = softplus(*v));
        s
    }

    /// `E = μ + softplus(ρ) ∘ ε`.
    pub fn sample(&self, noise: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        self.mu.ensure_same_shape(noise, "noise")?;
        let data = self
            .mu
            .as_slice()
            .iter()
            .zip(self.rho.as_slice())
            .zip(noise.as_slice())
            .map(|((m, r), e)| m + softplus(*r) * e)
            .collect();
        EmbeddingMatrix::from_node_major(self.dim(), self.num_nodes(), data)
    }

    /// Standard-normal noise of the parameters' shape.
    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> EmbeddingMatrix {
        let data = (0..self.dim() * self.num_nodes())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        EmbeddingMatrix::from_node_major(self.dim(), self.num_nodes(), data).expect("shape matches by construction")
    }
}

pub fn init_params(num_users: usize, num_items: usize, dim: usize) -> VariationalParams {
    VariationalParams::zeros(num_users, num_items, dim)
}

pub fn sample_embeddings(params: &VariationalParams, noise: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    params.sample(noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    #[test]
    fn zero_init_scales_are_ln2() {
        let p = init_params(1, 1, 2);
        assert!(p.mu.as_slice().iter().all(|&v| v == 0.0));
        assert!(p.scales().as_slice().iter().all(|&s| (s - LN_2).abs() < 1e-15));
        assert_eq!(p.scales().as_slice().len(), 4);
        assert_eq!(init_params(0, 0, 3).num_nodes(), 0);
    }

    #[test]
    fn sampling_cases() {
        let p = init_params(2, 3, 4);
        let zero = EmbeddingMatrix::zeros(4, 5);
        assert_eq!(p.sample(&zero).unwrap(), p.mu);

        let ones = EmbeddingMatrix::filled(4, 5, 1.0);
        let e = p.sample(&ones).unwrap();
        assert!(e.as_slice().iter().all(|&v| (v - LN_2).abs() < 1e-15));

        let q = VariationalParams::new(
            EmbeddingMatrix::filled(1, 1, 1.0),
            EmbeddingMatrix::filled(1, 1, (E - 1.0).ln()),
        )
        .unwrap();
        let e = q.sample(&EmbeddingMatrix::filled(1, 1, -2.0)).unwrap();
        assert!((e.as_slice()[0] + 1.0).abs() < 1e-14);

        assert!(p.sample(&EmbeddingMatrix::zeros(4, 4)).is_err());
    }

    #[test]
    fn softplus_round_trip_and_positivity() {
        for &x in &[-700.0, -30.0, -1.0, 0.0, 0.5, 20.0, 700.0] {
            let s = softplus(x);
            assert!(s > 0.0, "softplus({x}) = {s}");
        }
        for &x in &[-5.0, -0.3, 0.0, 1.7, 12.0] {
            assert!((softplus_inv(softplus(x)) - x).abs() < 1e-9);
        }
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
