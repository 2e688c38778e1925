use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::posterior::{gamma_t, mutual_information, UserPosterior};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::policy::{check_slate, rank_top_k, ItemVectors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// `μᵀe + (Γ_t/2)·√I(e)` with the information-theoretic width.
    UcbTheorem1,
    /// `μᵀe + ν·√(eᵀΣe)`.
    LinucbNu,
    /// Posterior sample `θ̃ ~ N(μ, Σ)`, ranked by `θ̃ᵀe`.
    Thompson,
    /// `μᵀe`.
    Greedy,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucb_theorem1" => Ok(Self::UcbTheorem1),
            "linucb_nu" => Ok(Self::LinucbNu),
            "thompson" => Ok(Self::Thompson),
            "greedy" => Ok(Self::Greedy),
            _ => Err(Error::Config(format!("unknown score mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: ScoreMode,
    pub delta: f64,
    pub nu: f64,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: ScoreMode::LinucbNu,
            delta: 0.05,
            nu: 1.0,
            noise_variance: 1.0,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("δ must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("ν must be finite and ≥ 0, got {}", self.nu)));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// Deterministic score of one item; `gamma` is the round's `Γ_t` and is only
/// read in `UcbTheorem1` mode.
pub fn ucb_score(state: &UserPosterior, e: &Vector, policy: &PolicyConfig, gamma: f64) -> f64 {
    let mean = state.mean().dot(e);
    match policy.mode {
        ScoreMode::Greedy | ScoreMode::Thompson => mean,
        ScoreMode::LinucbNu => mean + policy.nu * state.variance_along(e).sqrt(),
        ScoreMode::UcbTheorem1 => mean + 0.5 * gamma * mutual_information(state, e, policy.noise_variance).sqrt(),
    }
}

/// One posterior draw `μ + L^{-T} z`, where `Σ^{-1} = L Lᵀ`.
pub fn sample_posterior<R: Rng + ?Sized>(state: &UserPosterior, rng: &mut R) -> Vector {
    let z = Vector::from_fn(state.dim(), |_, _| StandardNormal.sample(rng));
    let offset = state
        .precision_factor()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a nonzero diagonal");
    state.mean() + offset
}

/// Scores every candidate for one round.
pub fn score_candidates<R: Rng + ?Sized>(
    state: &UserPosterior,
    ids: &[usize],
    items: &ItemVectors,
    policy: &PolicyConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let vectors: Vec<&Vector> = ids.iter().map(|&i| items.get(i)).collect::<Result<_>>()?;
    match policy.mode {
        ScoreMode::Thompson => {
            let theta = sample_posterior(state, rng);
            Ok(vectors.iter().map(|e| theta.dot(e)).collect())
        }
        ScoreMode::UcbTheorem1 => {
            let gamma = gamma_t(state, vectors.iter().copied(), policy.delta, policy.noise_variance)?;
            Ok(vectors.iter().map(|e| ucb_score(state, e, policy, gamma)).collect())
        }
        ScoreMode::Greedy | ScoreMode::LinucbNu => {
            Ok(vectors.iter().map(|e| ucb_score(state, e, policy, 0.0)).collect())
        }
    }
}

/// Top-`k` slate by score, ties to the lower item id.
pub fn select<R: Rng + ?Sized>(
    state: &UserPosterior,
    ids: &[usize],
    items: &ItemVectors,
    policy: &PolicyConfig,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_slate(ids.len(), k)?;
    let scores = score_candidates(state, ids, items, policy, rng)?;
    rank_top_k(ids, &scores, k)
}
