use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, Vector};
use crate::rng::{seeded, streams, Rng};

/// Acceptance below this fraction is treated as a misconfigured ensemble.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub num_items: usize,
    pub noise_std: f64,
    /// Item ensemble covariance `item_variance·I`; this is also the
    /// eigenvalue floor used by the sufficient-rounds threshold.
    pub item_variance: f64,
    /// Support radius `a` of the item ensemble.
    pub item_radius: f64,
    /// Norm of the true prior mean (the bound `m` is attained).
    pub prior_mean_norm: f64,
    pub prior_eig_min: f64,
    pub prior_eig_max: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            num_items: 50,
            noise_std: 0.5,
            item_variance: 0.1,
            item_radius: 1.0,
            prior_mean_norm: 1.0,
            prior_eig_min: 0.25,
            prior_eig_max: 1.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.dim == 0 || self.num_items == 0 {
            return Err(Error::Config("dimension and item count must be at least 1".into()));
        }
        if !positive(self.noise_std) || !positive(self.item_variance) || !positive(self.item_radius) {
            return Err(Error::Config(
                "noise std, item variance and item radius must be positive".into(),
            ));
        }
        if !(self.prior_mean_norm >= 0.0 && self.prior_mean_norm.is_finite()) {
            return Err(Error::Config("prior mean norm must be finite and ≥ 0".into()));
        }
        if !(positive(self.prior_eig_min) && self.prior_eig_min <= self.prior_eig_max && self.prior_eig_max.is_finite())
        {
            return Err(Error::Config(format!(
                "prior eigenvalue bounds must satisfy 0 < {} ≤ {}",
                self.prior_eig_min, self.prior_eig_max
            )));
        }
        Ok(())
    }
}

/// Gaussian linear bandit with a known task prior and a fixed item set.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    pub config: SyntheticConfig,
    pub prior_mean: Vector,
    pub prior_covariance: Matrix,
    /// Lower Cholesky factor of `prior_covariance`.
    prior_factor: Matrix,
    pub items: Vec<Vector>,
    /// Fraction of ensemble draws that fell inside the support.
    pub acceptance_rate: f64,
}

fn standard_normal(dim: usize, rng: &mut Rng) -> Vector {
    Vector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// `count` draws from `N(0, LLᵀ)` restricted to `‖x‖ ≤ radius`, with the
/// observed acceptance rate. Fails once acceptance is provably below
/// [`MIN_ACCEPTANCE`].
pub fn sample_truncated_gaussian(
    factor: &Matrix,
    radius: f64,
    count: usize,
    rng: &mut Rng,
) -> Result<(Vec<Vector>, f64)> {
    let dim = factor.nrows();
    let budget = ((count.max(10) as f64) / MIN_ACCEPTANCE).ceil() as usize;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= budget {
            return Err(Error::Config(format!(
                "truncated item ensemble rejects more than {:.1}% of draws ({} of {attempts} accepted)",
                100.0 * (1.0 - MIN_ACCEPTANCE),
                out.len()
            )));
        }
        attempts += 1;
        let x = factor * standard_normal(dim, rng);
        if x.norm() <= radius {
            out.push(x);
        }
    }
    Ok((out, count as f64 / attempts.max(1) as f64))
}

impl SyntheticEnv {
    /// Draws the true prior and the item set from `seed`.
    pub fn sample(config: &SyntheticConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut rng = seeded(seed, streams::REGRET_BASE);
        let direction = standard_normal(d, &mut rng);
        let prior_mean = if direction.norm() > 0.0 {
            direction.normalize() * config.prior_mean_norm
        } else {
            Vector::zeros(d)
        };
        let q = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng)).qr().q();
        let eigs = Vector::from_fn(d, |_, _| rng.random_range(config.prior_eig_min..=config.prior_eig_max));
        let prior_covariance = &q * Matrix::from_diagonal(&eigs) * q.transpose();
        let item_factor = Matrix::identity(d, d) * config.item_variance.sqrt();
        let (items, acceptance_rate) =
            sample_truncated_gaussian(&item_factor, config.item_radius, config.num_items, &mut rng)?;
        Self::from_parts(config.clone(), prior_mean, prior_covariance, items, acceptance_rate)
    }

    /// An environment with explicit prior and items.
    pub fn from_parts(
        config: SyntheticConfig,
        prior_mean: Vector,
        mut prior_covariance: Matrix,
        items: Vec<Vector>,
        acceptance_rate: f64,
    ) -> Result<Self> {
        let d = config.dim;
        if prior_mean.len() != d || prior_covariance.nrows() != d || items.iter().any(|e| e.len() != d) {
            return Err(Error::Dimension(format!(
                "synthetic environment parts disagree with dimension {d}"
            )));
        }
        if items.is_empty() {
            return Err(Error::Config("synthetic environment needs at least one item".into()));
        }
        if let Some(e) = items.iter().find(|e| e.norm() > config.item_radius) {
            return Err(Error::Config(format!(
                "item norm {} exceeds the support radius {}",
                e.norm(),
                config.item_radius
            )));
        }
        crate::linalg::symmetrize(&mut prior_covariance);
        let prior_factor = cholesky(&prior_covariance, "true prior covariance")?.l();
        Ok(Self {
            config,
            prior_mean,
            prior_covariance,
            prior_factor,
            items,
            acceptance_rate,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn noise_variance(&self) -> f64 {
        self.config.noise_std * self.config.noise_std
    }

    /// One task vector `θ ~ N(μ*, Σ*)`.
    pub fn draw_task(&self, rng: &mut Rng) -> Vector {
        &self.prior_mean + &self.prior_factor * standard_normal(self.dim(), rng)
    }

    /// `θᵀe + ξ`, `ξ ~ N(0, σ²)`.
    pub fn reward(&self, task: &Vector, item: usize, rng: &mut Rng) -> f64 {
        let xi: f64 = StandardNormal.sample(rng);
        task.dot(&self.items[item]) + self.config.noise_std * xi
    }

    /// Extreme eigenvalues of the true prior covariance.
    pub fn prior_eigen_range(&self) -> (f64, f64) {
        let eig = self.prior_covariance.clone().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negligible_truncation_accepts_everything() {
        let mut rng = seeded(3, 0);
        let factor = Matrix::identity(2, 2) * 0.1;
        let (items, rate) = sample_truncated_gaussian(&factor, 10.0, 1000, &mut rng).unwrap();
        assert_eq!(items.len(), 1000);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn hopeless_truncation_is_a_config_error() {
        let mut rng = seeded(3, 0);
        let factor = Matrix::identity(8, 8) * 10.0;
        let err = sample_truncated_gaussian(&factor, 0.01, 5, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn sampled_env_respects_bounds() {
        let cfg = SyntheticConfig::default();
        let env = SyntheticEnv::sample(&cfg, 11).unwrap();
        assert_eq!(env.items.len(), cfg.num_items);
        assert!(env.items.iter().all(|e| e.norm() <= cfg.item_radius));
        assert!((env.prior_mean.norm() - cfg.prior_mean_norm).abs() < 1e-12);
        let (lo, hi) = env.prior_eigen_range();
        assert!(lo >= cfg.prior_eig_min - 1e-10 && hi <= cfg.prior_eig_max + 1e-10);
        assert!(env.acceptance_rate > 0.0 && env.acceptance_rate <= 1.0);
    }
}
