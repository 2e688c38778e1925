//! The interface every interactive policy implements, plus shared helpers.
//!
//! A [`Recommender`] is immutable shared state (item vectors, priors,
//! popularity tables). Each episode gets its own [`Session`], which owns the
//! per-user posterior and random generator, so episodes run in parallel.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::pretrain::PretrainedModel;

/// Fixed item feature vectors indexed by item id.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemVectors {
    dim: usize,
    vectors: Vec<Vector>,
}

impl ItemVectors {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "item {i} has {} coordinates, expected {dim}",
                r.len()
            )));
        }
        Ok(Self {
            dim,
            vectors: rows.into_iter().map(Vector::from_vec).collect(),
        })
    }

    /// `e*_i = Φ*·g_i` for every item of a trained model.
    pub fn from_model(model: &PretrainedModel) -> Self {
        Self {
            dim: model.dim(),
            vectors: (0..model.num_items)
                .map(|i| Vector::from_column_slice(model.item_vector(i)))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, item: usize) -> Result<&Vector> {
        self.vectors.get(item).ok_or(Error::IndexOutOfRange {
            what: "items",
            index: item,
            len: self.vectors.len(),
        })
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Vector> {
        self.vectors.iter()
    }
}

/// Per-episode inputs handed to [`Recommender::start`].
#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub user: usize,
    /// `(item, reward)` pairs observed before round 1 (warm start).
    pub history: &'a [(usize, f64)],
    /// Experiment seed; sessions derive their generators from it and `user`.
    pub seed: u64,
}

pub trait Session {
    /// Ranks `candidates` and returns the top `k` item ids, best first.
    fn recommend(&mut self, candidates: &[usize], k: usize) -> Result<Vec<usize>>;

    /// Feeds back the reward of one recommended item.
    fn observe(&mut self, item: usize, reward: f64) -> Result<()>;
}

pub trait Recommender: Send + Sync {
    fn name(&self) -> &str;

    fn start<'a>(&'a self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Session + 'a>>;
}

/// Orders by score descending, then id ascending.
pub fn compare_scored(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best `ids` by `scores`, ties broken by ascending id.
pub fn rank_top_k(ids: &[usize], scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if ids.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} candidates but {} scores",
            ids.len(),
            scores.len()
        )));
    }
    check_slate(ids.len(), k)?;
    if let Some(pos) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Numerical(format!("NaN score for item {}", ids[pos])));
    }
    let mut scored: Vec<(usize, f64)> = ids.iter().copied().zip(scores.iter().copied()).collect();
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| compare_scored(*a, *b));
        scored.truncate(k);
    }
    scored.sort_unstable_by(|a, b| compare_scored(*a, *b));
    Ok(scored.into_iter().map(|(id, _)| id).collect())
}

pub(crate) fn check_slate(available: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("slate size k must be at least 1".into()));
    }
    if available < k {
        return Err(Error::InsufficientCandidates { needed: k, available });
    }
    Ok(())
}

/// Generator seed for one user's episode under a policy-level seed.
pub(crate) fn episode_seed(experiment_seed: u64, policy_seed: u64) -> u64 {
    experiment_seed ^ policy_seed.rotate_left(29).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lower_id() {
        assert_eq!(rank_top_k(&[7, 3, 5], &[0.2, 0.9, 0.9], 1).unwrap(), vec![3]);
        assert_eq!(rank_top_k(&[7, 3, 5], &[0.2, 0.9, 0.9], 3).unwrap(), vec![3, 5, 7]);
    }

    #[test]
    fn slate_errors() {
        assert!(matches!(
            rank_top_k(&[1], &[0.0], 2),
            Err(Error::InsufficientCandidates {
                needed: 2,
                available: 1
            })
        ));
        assert!(rank_top_k(&[1], &[0.0], 0).is_err());
        assert!(rank_top_k(&[1, 2], &[f64::NAN, 0.0], 1).is_err());
    }
}
