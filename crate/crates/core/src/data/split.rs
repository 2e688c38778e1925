use rand::seq::SliceRandom;
use rand::Rng as _;

use super::InteractionDataset;
use crate::rng::{seeded, streams};

/// Global random mask keeping each record with probability `fraction`.
pub fn random_train_mask(num_records: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let mut rng = seeded(seed, streams::SPLIT);
    (0..num_records).map(|_| rng.random::<f64>() < fraction).collect()
}

/// The `n` users with the most records; ties go to the lower index.
pub fn most_active_users(dataset: &InteractionDataset, n: usize) -> Vec<usize> {
    let activity = dataset.user_activity();
    let mut users: Vec<usize> = (0..dataset.num_users).collect();
    users.sort_by(|&a, &b| activity[b].cmp(&activity[a]).then(a.cmp(&b)));
    users.truncate(n);
    users
}

/// Keeps a uniformly drawn `fraction` of users (at least one), preserving
/// their relative order.
pub fn subsample_users(dataset: &InteractionDataset, fraction: f64, seed: u64) -> InteractionDataset {
    if fraction >= 1.0 {
        return dataset.clone();
    }
    let keep = ((dataset.num_users as f64 * fraction).round() as usize).clamp(1, dataset.num_users);
    let mut users: Vec<usize> = (0..dataset.num_users).collect();
    let mut rng = seeded(seed, streams::SPLIT + 100);
    users.shuffle(&mut rng);
    users.truncate(keep);
    users.sort_unstable();
    dataset.select_users(&users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Record, SatisfactionRule};

    #[test]
    fn mask_fraction_is_close() {
        let m = random_train_mask(20_000, 0.5, 7);
        let kept = m.iter().filter(|&&k| k).count() as f64 / 20_000.0;
        assert!((kept - 0.5).abs() < 0.02);
        assert_eq!(m, random_train_mask(20_000, 0.5, 7));
    }

    #[test]
    fn most_active_breaks_ties_by_index() {
        let recs = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1)]
            .iter()
            .map(|&(user, item)| Record {
                user,
                item,
                value: 1.0,
                timestamp: None,
            })
            .collect();
        let ds = InteractionDataset::from_records(3, 2, recs, SatisfactionRule::MOVIELENS);
        assert_eq!(most_active_users(&ds, 2), vec![1, 2]);
    }
}
