//! A small planted-taste rating corpus used when real datasets are absent.
//!
//! Every item carries exactly one genre and a latent quality. Every user has
//! a favourite genre (and a weaker second one). The latent score
//! `base + quality_scale·q_i + affinity_u(genre_i) + noise` is squashed into
//! a 1–5 rating, so popularity and personal taste both drive satisfaction.
//! Planted drifters switch favourite genre halfway through their timeline,
//! with the two halves drawn from disjoint genre groups.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{InteractionDataset, Record, SatisfactionRule};
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_genres: usize,
    /// Probability that a given (user, item) pair is recorded.
    pub observe_fraction: f64,
    pub base_logit: f64,
    pub quality_scale: f64,
    pub taste_scale: f64,
    pub noise: f64,
    pub num_drifters: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            num_users: 200,
            num_items: 500,
            num_genres: 8,
            observe_fraction: 1.0,
            base_logit: -2.2,
            quality_scale: 1.0,
            taste_scale: 3.2,
            noise: 0.5,
            num_drifters: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateCorpus {
    pub dataset: InteractionDataset,
    pub item_genre: Vec<usize>,
    pub favorite_genre: Vec<usize>,
    /// Users whose taste switches between the two halves of their timeline.
    pub drifters: Vec<usize>,
}

impl SurrogateCorpus {
    pub fn generate(cfg: &SurrogateConfig) -> Self {
        let mut rng = seeded(cfg.seed, streams::SURROGATE);
        let g = cfg.num_genres.max(1);
        let mut item_genre: Vec<usize> = (0..cfg.num_items).map(|i| i % g).collect();
        item_genre.shuffle(&mut rng);
        let quality: Vec<f64> = (0..cfg.num_items).map(|_| StandardNormal.sample(&mut rng)).collect();

        let mut users: Vec<usize> = (0..cfg.num_users).collect();
        users.shuffle(&mut rng);
        let mut drifters: Vec<usize> = users[..cfg.num_drifters.min(cfg.num_users)].to_vec();
        drifters.sort_unstable();
        let is_drifter = {
            let mut v = vec![false; cfg.num_users];
            drifters.iter().for_each(|&u| v[u] = true);
            v
        };

        let half = g / 2;
        let mut favorite_genre = Vec::with_capacity(cfg.num_users);
        let mut records = Vec::new();
        for u in 0..cfg.num_users {
            let (fav_early, fav_late, second) = if is_drifter[u] && half > 0 {
                (
                    rng.random_range(0..half),
                    half + rng.random_range(0..g - half),
                    usize::MAX,
                )
            } else {
                let f = rng.random_range(0..g);
                let s = (f + 1 + rng.random_range(0..g.max(2) - 1)) % g;
                (f, f, s)
            };
            favorite_genre.push(fav_early);

            // Timeline: drifters see the first genre group first.
            let mut order: Vec<usize> = (0..cfg.num_items).collect();
            order.shuffle(&mut rng);
            if is_drifter[u] {
                order.sort_by_key(|&i| item_genre[i] >= half);
            }
            let mut t = 0i64;
            for (pos, &i) in order.iter().enumerate() {
                let observed = rng.random::<f64>() < cfg.observe_fraction;
                let eps: f64 = StandardNormal.sample(&mut rng);
                if !observed {
                    continue;
                }
                t += 1;
                let late = pos >= cfg.num_items / 2;
                let fav = if late { fav_late } else { fav_early };
                let affinity = if item_genre[i] == fav {
                    cfg.taste_scale
                } else if item_genre[i] == second {
                    0.5 * cfg.taste_scale
                } else {
                    0.0
                };
                let s = cfg.base_logit + cfg.quality_scale * quality[i] + affinity + cfg.noise * eps;
                let p = 1.0 / (1.0 + (-s).exp());
                let rating = (1.0 + (5.0 * p).floor()).min(5.0);
                records.push(Record {
                    user: u,
                    item: i,
                    value: rating,
                    timestamp: Some(t),
                });
            }
        }

        let mut dataset =
            InteractionDataset::from_records(cfg.num_users, cfg.num_items, records, SatisfactionRule::MOVIELENS);
        dataset.item_genres = Some(
            item_genre
                .iter()
                .map(|&gi| {
                    let mut v = vec![0.0; g];
                    v[gi] = 1.0;
                    v
                })
                .collect(),
        );
        Self {
            dataset,
            item_genre,
            favorite_genre,
            drifters,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_fully_observed() {
        let cfg = SurrogateConfig {
            num_users: 20,
            num_items: 30,
            ..Default::default()
        };
        let a = SurrogateCorpus::generate(&cfg);
        let b = SurrogateCorpus::generate(&cfg);
        assert_eq!(a.dataset.records, b.dataset.records);
        assert_eq!(a.dataset.len(), 600);
        assert!(a
            .dataset
            .records
            .iter()
            .all(|r| (1.0..=5.0).contains(&r.value) && r.value.fract() == 0.0));
    }

    #[test]
    fn favourite_genre_is_preferred() {
        let c = SurrogateCorpus::generate(&SurrogateConfig::default());
        let ds = &c.dataset;
        let (mut fav, mut nfav, mut other, mut nother) = (0.0, 0.0, 0.0, 0.0);
        for r in &ds.records {
            let sat = ds.satisfaction.theta(r.value);
            if c.item_genre[r.item] == c.favorite_genre[r.user] {
                fav += sat;
                nfav += 1.0;
            } else {
                other += sat;
                nother += 1.0;
            }
        }
        assert!(fav / nfav > 3.0 * (other / nother));
    }
}
