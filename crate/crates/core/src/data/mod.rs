//! Interaction datasets: in-memory representation, file ingestion, splits
//! and a synthetic surrogate corpus.

mod ingest;
mod split;
mod synthetic;

pub use ingest::{attach_genres, ingest, write_id_map, DataFormat, GenreFormat};
pub use split::{most_active_users, random_train_mask, subsample_users};
pub use synthetic::{SurrogateConfig, SurrogateCorpus};

use sha2::{Digest, Sha256};

/// One observed interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub user: usize,
    pub item: usize,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// How a raw feedback value maps to satisfaction and to the evaluation
/// signal `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SatisfactionRule {
    /// Explicit ratings: satisfied iff `value ≥ threshold`; `θ ∈ {0, 1}`.
    RatingAtLeast(f64),
    /// Watch ratios: satisfied iff `ratio ≥ threshold`; `θ` is the ratio
    /// itself, optionally capped.
    WatchRatioAtLeast { threshold: f64, cap: Option<f64> },
}

impl SatisfactionRule {
    pub const MOVIELENS: Self = SatisfactionRule::RatingAtLeast(4.0);
    pub const KUAIREC: Self = SatisfactionRule::WatchRatioAtLeast {
        threshold: 2.0,
        cap: None,
    };

    pub fn is_satisfied(&self, value: f64) -> bool {
        match *self {
            SatisfactionRule::RatingAtLeast(t) => value >= t,
            SatisfactionRule::WatchRatioAtLeast { threshold, .. } => value >= threshold,
        }
    }

    pub fn theta(&self, value: f64) -> f64 {
        match *self {
            SatisfactionRule::RatingAtLeast(t) => {
                if value >= t {
                    1.0
                } else {
                    0.0
                }
            }
            SatisfactionRule::WatchRatioAtLeast { cap, .. } => match cap {
                Some(c) => value.min(c),
                None => value,
            },
        }
    }
}

/// Raw `(user, item, value, timestamp)` records over densely indexed users
/// and items, plus the id maps back to the source identifiers.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub records: Vec<Record>,
    pub satisfaction: SatisfactionRule,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    /// Optional per-item genre indicator vectors (all of equal length).
    pub item_genres: Option<Vec<Vec<f64>>>,
}

impl InteractionDataset {
    /// Dataset with synthetic string ids `0..M`, `0..N`.
    pub fn from_records(
        num_users: usize,
        num_items: usize,
        records: Vec<Record>,
        satisfaction: SatisfactionRule,
    ) -> Self {
        Self {
            num_users,
            num_items,
            records,
            satisfaction,
            user_ids: (0..num_users).map(|u| u.to_string()).collect(),
            item_ids: (0..num_items).map(|i| i.to_string()).collect(),
            item_genres: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by user, each group in the dataset's record order.
    pub fn records_by_user(&self) -> Vec<Vec<Record>> {
        let mut out = vec![Vec::new(); self.num_users];
        for r in &self.records {
            out[r.user].push(*r);
        }
        out
    }

    pub fn user_activity(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_users];
        for r in &self.records {
            counts[r.user] += 1;
        }
        counts
    }

    /// Number of satisfied interactions per item.
    pub fn satisfied_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_items];
        for r in &self.records {
            if self.satisfaction.is_satisfied(r.value) {
                counts[r.item] += 1;
            }
        }
        counts
    }

    /// Keeps only `users` (re-indexed in the given order); items keep their
    /// indices. Returns the new dataset.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.num_users];
        for (new, &old) in users.iter().enumerate() {
            remap[old] = new;
        }
        let records = self
            .records
            .iter()
            .filter(|r| remap[r.user] != usize::MAX)
            .map(|r| Record {
                user: remap[r.user],
                ..*r
            })
            .collect();
        Self {
            num_users: users.len(),
            num_items: self.num_items,
            records,
            satisfaction: self.satisfaction,
            user_ids: users.iter().map(|&u| self.user_ids[u].clone()).collect(),
            item_ids: self.item_ids.clone(),
            item_genres: self.item_genres.clone(),
        }
    }

    /// Keeps the records whose mask entry is `true`.
    pub fn filter_records(&self, keep: &[bool]) -> Self {
        let records = self
            .records
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(r, _)| *r)
            .collect();
        Self {
            records,
            ..self.clone()
        }
    }

    /// SHA-256 over the record stream, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_users as u64).to_le_bytes());
        h.update((self.num_items as u64).to_le_bytes());
        for r in &self.records {
            h.update((r.user as u64).to_le_bytes());
            h.update((r.item as u64).to_le_bytes());
            h.update(r.value.to_le_bytes());
            h.update(r.timestamp.unwrap_or(i64::MIN).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_threshold_boundary() {
        let rule = SatisfactionRule::MOVIELENS;
        assert!(rule.is_satisfied(4.0));
        assert!(!rule.is_satisfied(3.9));
        assert_eq!(rule.theta(5.0), 1.0);
        assert_eq!(rule.theta(3.0), 0.0);
    }

    #[test]
    fn watch_ratio_theta_is_raw_unless_capped() {
        let rule = SatisfactionRule::KUAIREC;
        assert_eq!(rule.theta(3.7), 3.7);
        assert!(rule.is_satisfied(2.0));
        assert!(!rule.is_satisfied(1.99));
        let capped = SatisfactionRule::WatchRatioAtLeast {
            threshold: 2.0,
            cap: Some(3.0),
        };
        assert_eq!(capped.theta(3.7), 3.0);
    }

    #[test]
    fn select_users_reindexes() {
        let recs = vec![
            Record {
                user: 0,
                item: 1,
                value: 5.0,
                timestamp: None,
            },
            Record {
                user: 2,
                item: 0,
                value: 3.0,
                timestamp: None,
            },
        ];
        let ds = InteractionDataset::from_records(3, 2, recs, SatisfactionRule::MOVIELENS);
        let sub = ds.select_users(&[2]);
        assert_eq!(sub.num_users, 1);
        assert_eq!(sub.records.len(), 1);
        assert_eq!(sub.records[0].user, 0);
        assert_eq!(sub.user_ids, vec!["2".to_string()]);
    }
}
