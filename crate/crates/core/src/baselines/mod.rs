//! Reference policies: ridge-regression ICF with UCB or Thompson
//! exploration, greedy MF, popularity and uniform random.

use nalgebra::{Cholesky, Dyn};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, inverse_quad_form, Matrix, Vector};
use crate::policy::{check_slate, episode_seed, rank_top_k, EpisodeContext, ItemVectors, Recommender, Session};
use crate::rng::{seeded, streams, Rng};

/// Per-user ridge posterior `μ = A⁻¹b`, `Σ = σ²A⁻¹` with `A = Σ eeᵀ + λI`.
#[derive(Debug, Clone)]
pub struct IcfState {
    gram: Matrix,
    moment: Vector,
    mu: Vector,
    chol: Cholesky<f64, Dyn>,
    pub lambda: f64,
    pub noise_variance: f64,
}

impl IcfState {
    pub fn new(dim: usize, lambda: f64, noise_variance: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("ridge λ must be positive, got {lambda}")));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        let gram = Matrix::identity(dim, dim) * lambda;
        let chol = cholesky(&gram, "ridge Gram matrix")?;
        Ok(Self {
            gram,
            moment: Vector::zeros(dim),
            mu: Vector::zeros(dim),
            chol,
            lambda,
            noise_variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mu
    }

    pub fn covariance(&self) -> Matrix {
        self.chol.inverse() * self.noise_variance
    }

    /// `eᵀΣe`.
    pub fn variance_along(&self, e: &Vector) -> f64 {
        self.noise_variance * inverse_quad_form(&self.chol, e)
    }
}

pub fn icf_update(state: &mut IcfState, e: &Vector, reward: f64) -> Result<()> {
    if !reward.is_finite() {
        return Err(Error::Data(format!("non-finite reward {reward}")));
    }
    if e.len() != state.dim() {
        return Err(Error::Dimension(format!(
            "item vector of length {}, state has dimension {}",
            e.len(),
            state.dim()
        )));
    }
    state.gram.ger(1.0, e, e, 1.0);
    state.moment.axpy(reward, e, 1.0);
    state.chol = cholesky(&state.gram, "ridge Gram matrix")?;
    state.mu = state.chol.solve(&state.moment);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IcfMode {
    /// `μᵀe + c√(ln t)·‖e‖_Σ`.
    Ucb { c: f64 },
    /// Rank by `θ̃ᵀe` with `θ̃ ~ N(μ, Σ)`.
    Thompson,
}

/// Scores for round `t ≥ 1`.
pub fn icf_scores<R: rand::Rng + ?Sized>(
    state: &IcfState,
    ids: &[usize],
    items: &ItemVectors,
    mode: IcfMode,
    round: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if round == 0 {
        return Err(Error::Config("ICF rounds start at t = 1".into()));
    }
    let vectors: Vec<&Vector> = ids.iter().map(|&i| items.get(i)).collect::<Result<_>>()?;
    match mode {
        IcfMode::Ucb { c } => {
            let width = c * (round as f64).ln().sqrt();
            Ok(vectors
                .iter()
                .map(|e| {
                    let mean = state.mu.dot(e);
                    if width == 0.0 {
                        mean
                    } else {
                        mean + width * state.variance_along(e).sqrt()
                    }
                })
                .collect())
        }
        IcfMode::Thompson => {
            let z = Vector::from_fn(state.dim(), |_, _| StandardNormal.sample(rng));
            // Σ = σ² (L Lᵀ)⁻¹, so σ L⁻ᵀ z has covariance Σ.
            let offset = state
                .chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .expect("Cholesky factor has a nonzero diagonal")
                * state.noise_variance.sqrt();
            let theta = &state.mu + offset;
            Ok(vectors.iter().map(|e| theta.dot(e)).collect())
        }
    }
}

pub fn icf_select<R: rand::Rng + ?Sized>(
    state: &IcfState,
    ids: &[usize],
    items: &ItemVectors,
    mode: IcfMode,
    round: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_slate(ids.len(), k)?;
    let scores = icf_scores(state, ids, items, mode, round, rng)?;
    rank_top_k(ids, &scores, k)
}

/// ICF over fixed item vectors; with `Ucb { c: 0 }` this is greedy MF.
#[derive(Debug, Clone)]
pub struct IcfPolicy {
    name: String,
    items: ItemVectors,
    lambda: f64,
    noise_variance: f64,
    mode: IcfMode,
    seed: u64,
}

impl IcfPolicy {
    pub fn new(
        name: impl Into<String>,
        items: ItemVectors,
        lambda: f64,
        noise_variance: f64,
        mode: IcfMode,
        seed: u64,
    ) -> Result<Self> {
        IcfState::new(items.dim(), lambda, noise_variance)?;
        if let IcfMode::Ucb { c } = mode {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("ICF c must be finite and ≥ 0, got {c}")));
            }
        }
        Ok(Self {
            name: name.into(),
            items,
            lambda,
            noise_variance,
            mode,
            seed,
        })
    }

    /// Greedy matrix factorization: ridge refit, no exploration bonus.
    pub fn mf(items: ItemVectors, lambda: f64, noise_variance: f64) -> Result<Self> {
        Self::new("mf", items, lambda, noise_variance, IcfMode::Ucb { c: 0.0 }, 0)
    }
}

struct IcfSession<'a> {
    policy: &'a IcfPolicy,
    state: IcfState,
    round: usize,
    rng: Rng,
}

impl Session for IcfSession<'_> {
    fn recommend(&mut self, candidates: &[usize], k: usize) -> Result<Vec<usize>> {
        self.round += 1;
        let p = self.policy;
        icf_select(&self.state, candidates, &p.items, p.mode, self.round, k, &mut self.rng)
    }

    fn observe(&mut self, item: usize, reward: f64) -> Result<()> {
        icf_update(&mut self.state, self.policy.items.get(item)?, reward)
    }
}

impl Recommender for IcfPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn start<'a>(&'a self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Session + 'a>> {
        let mut state = IcfState::new(self.items.dim(), self.lambda, self.noise_variance)?;
        for &(i, r) in ctx.history {
            icf_update(&mut state, self.items.get(i)?, r)?;
        }
        Ok(Box::new(IcfSession {
            policy: self,
            state,
            round: 0,
            rng: seeded(
                episode_seed(ctx.seed, self.seed),
                streams::EPISODE_BASE + ctx.user as u64,
            ),
        }))
    }
}

/// Recommends the items with the most satisfied training interactions.
#[derive(Debug, Clone)]
pub struct PopPolicy {
    counts: Vec<f64>,
}

impl PopPolicy {
    pub fn from_dataset(dataset: &InteractionDataset) -> Self {
        Self::from_counts(dataset.satisfied_counts())
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        Self {
            counts: counts.into_iter().map(|c| c as f64).collect(),
        }
    }

    /// All item ids, most popular first, ties to the lower id.
    pub fn ranking(&self) -> Vec<usize> {
        let ids: Vec<usize> = (0..self.counts.len()).collect();
        if ids.is_empty() {
            return ids;
        }
        rank_top_k(&ids, &self.counts, ids.len()).expect("scores are finite counts")
    }
}

struct PopSession<'a>(&'a PopPolicy);

impl Session for PopSession<'_> {
    fn recommend(&mut self, candidates: &[usize], k: usize) -> Result<Vec<usize>> {
        let counts = &self.0.counts;
        let scores = candidates
            .iter()
            .map(|&i| {
                counts.get(i).copied().ok_or(Error::IndexOutOfRange {
                    what: "items",
                    index: i,
                    len: counts.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rank_top_k(candidates, &scores, k)
    }

    fn observe(&mut self, _item: usize, _reward: f64) -> Result<()> {
        Ok(())
    }
}

impl Recommender for PopPolicy {
    fn name(&self) -> &str {
        "pop"
    }

    fn start<'a>(&'a self, _ctx: &EpisodeContext<'_>) -> Result<Box<dyn Session + 'a>> {
        Ok(Box::new(PopSession(self)))
    }
}

/// Uniform draws without replacement from the candidate set.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy {
    pub seed: u64,
}

struct RandomSession(Rng);

impl Session for RandomSession {
    fn recommend(&mut self, candidates: &[usize], k: usize) -> Result<Vec<usize>> {
        check_slate(candidates.len(), k)?;
        Ok(rand::seq::index::sample(&mut self.0, candidates.len(), k)
            .into_iter()
            .map(|j| candidates[j])
            .collect())
    }

    fn observe(&mut self, _item: usize, _reward: f64) -> Result<()> {
        Ok(())
    }
}

impl Recommender for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn start<'a>(&'a self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Session + 'a>> {
        let mut rng = seeded(
            episode_seed(ctx.seed, self.seed),
            streams::EPISODE_BASE + ctx.user as u64,
        );
        // Decorrelate from sessions of other policies sharing the stream.
        let _: u64 = rng.random();
        Ok(Box::new(RandomSession(rng)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn ridge_closed_forms() {
        let s = IcfState::new(2, 1.0, 1.0).unwrap();
        assert_eq!(s.mean(), &Vector::zeros(2));
        assert!((s.covariance() - Matrix::identity(2, 2)).amax() < 1e-15);
        let s2 = IcfState::new(2, 4.0, 2.0).unwrap();
        assert!((s2.covariance() - Matrix::identity(2, 2) * 0.5).amax() < 1e-15);

        let mut s = s;
        icf_update(&mut s, &v(&[1.0, 0.0]), 1.0).unwrap();
        assert!((s.mean() - v(&[0.5, 0.0])).amax() < 1e-15);
        assert!((s.covariance() - Matrix::from_diagonal(&v(&[0.5, 1.0]))).amax() < 1e-15);
    }

    #[test]
    fn first_round_and_zero_c_are_greedy() {
        let items = ItemVectors::from_rows(2, vec![vec![1.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let mut s = IcfState::new(2, 1.0, 1.0).unwrap();
        icf_update(&mut s, &v(&[1.0, 0.0]), 1.0).unwrap();
        let mut rng = seeded(0, 0);
        let greedy = icf_scores(&s, &[0, 1], &items, IcfMode::Ucb { c: 0.0 }, 7, &mut rng).unwrap();
        let first = icf_scores(&s, &[0, 1], &items, IcfMode::Ucb { c: 3.0 }, 1, &mut rng).unwrap();
        assert!((greedy[0] - 0.5).abs() < 1e-15 && greedy[1] == 0.0);
        assert_eq!(first, greedy);
        let later = icf_scores(&s, &[0, 1], &items, IcfMode::Ucb { c: 3.0 }, 7, &mut rng).unwrap();
        assert!(later[1] > later[0]);
        assert!(icf_scores(&s, &[0], &items, IcfMode::Ucb { c: 1.0 }, 0, &mut rng).is_err());
    }

    #[test]
    fn pop_order_and_ties() {
        let pop = PopPolicy::from_counts(vec![5, 2, 9]);
        assert_eq!(pop.ranking(), vec![2, 0, 1]);
        let pop = PopPolicy::from_counts(vec![1, 3, 3, 0]);
        assert_eq!(pop.ranking(), vec![1, 2, 0, 3]);
    }

    #[test]
    fn random_is_reproducible_and_distinct() {
        let p = RandomPolicy { seed: 3 };
        let ctx = EpisodeContext {
            user: 4,
            history: &[],
            seed: 1,
        };
        let ids: Vec<usize> = (10..60).collect();
        let a = p.start(&ctx).unwrap().recommend(&ids, 10).unwrap();
        let b = p.start(&ctx).unwrap().recommend(&ids, 10).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert!(a.iter().all(|i| ids.contains(i)));
    }
}
