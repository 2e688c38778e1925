use crate::data::{most_active_users, random_train_mask, InteractionDataset, Record};
use crate::error::{Error, Result};

/// Held-out test users plus the training interactions of everyone else.
#[derive(Debug, Clone)]
pub struct UserSplit {
    /// Test users as indices into the source dataset; user `j` of `test`
    /// is `test_users[j]`.
    pub test_users: Vec<usize>,
    pub test: InteractionDataset,
    pub train: InteractionDataset,
}

/// Keeps each record independently with probability `fraction`.
pub fn train_subset(dataset: &InteractionDataset, fraction: f64, seed: u64) -> Result<InteractionDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(dataset.clone());
    }
    Ok(dataset.filter_records(&random_train_mask(dataset.len(), fraction, seed)))
}

fn split_users(
    dataset: &InteractionDataset,
    test_users: Vec<usize>,
    train_fraction: f64,
    seed: u64,
) -> Result<UserSplit> {
    let mut is_test = vec![false; dataset.num_users];
    test_users.iter().for_each(|&u| is_test[u] = true);
    let rest: Vec<usize> = (0..dataset.num_users).filter(|&u| !is_test[u]).collect();
    let train = train_subset(&dataset.select_users(&rest), train_fraction, seed)?;
    Ok(UserSplit {
        test: dataset.select_users(&test_users),
        test_users,
        train,
    })
}

/// The `num_test_users` most active users become cold-start test users;
/// `train_fraction` of the remaining interactions form the training set.
pub fn cold_start_split(
    dataset: &InteractionDataset,
    num_test_users: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<UserSplit> {
    if num_test_users == 0 || num_test_users >= dataset.num_users {
        return Err(Error::Config(format!(
            "need 1 ≤ test users < {} users, got {num_test_users}",
            dataset.num_users
        )));
    }
    split_users(
        dataset,
        most_active_users(dataset, num_test_users),
        train_fraction,
        seed,
    )
}

/// Warm-start users whose taste moved the most between the two halves of
/// their timeline.
#[derive(Debug, Clone)]
pub struct DriftSplit {
    /// Selected users as indices into the source dataset, most drifted first.
    pub test_users: Vec<usize>,
    /// Per test user (indexed as in `test`), the earlier half of records.
    pub set1: Vec<Vec<Record>>,
    pub set2: Vec<Vec<Record>>,
    /// Cosine similarity of the two halves' genre-count vectors.
    pub similarity: Vec<f64>,
    pub switch_round: usize,
    pub test: InteractionDataset,
    /// All interactions of the remaining users.
    pub train: InteractionDataset,
}

/// Time-ordered halves of one user's records; the earlier half has
/// `⌊n/2⌋` records. Records without timestamps keep their file order.
pub fn time_halves(records: &[Record]) -> (Vec<Record>, Vec<Record>) {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| r.timestamp.unwrap_or(i64::MIN));
    let later = sorted.split_off(sorted.len() / 2);
    (sorted, later)
}

fn genre_counts(records: &[Record], genres: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    for r in records {
        for (acc, g) in v.iter_mut().zip(&genres[r.item]) {
            *acc += g;
        }
    }
    v
}

/// `a·b / (‖a‖‖b‖)`, or `None` when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| dot / (na * nb))
}

/// Selects the `num_test_users` users with the lowest genre similarity
/// between their two time halves. Users whose similarity is undefined
/// (an empty half or genre-less items) are never selected.
pub fn build_drift_split(
    dataset: &InteractionDataset,
    num_test_users: usize,
    switch_round: usize,
) -> Result<DriftSplit> {
    let genres = dataset
        .item_genres
        .as_ref()
        .ok_or_else(|| Error::Data("drift protocol needs item genre vectors; none are attached".into()))?;
    let width = genres.first().map_or(0, Vec::len);
    let by_user = dataset.records_by_user();
    let mut scored: Vec<(usize, f64)> = Vec::new();
    let mut halves = Vec::with_capacity(dataset.num_users);
    for (u, recs) in by_user.iter().enumerate() {
        let (a, b) = time_halves(recs);
        if let Some(s) = cosine_similarity(&genre_counts(&a, genres, width), &genre_counts(&b, genres, width)) {
            scored.push((u, s));
        }
        halves.push((a, b));
    }
    if num_test_users == 0 || num_test_users > scored.len() || num_test_users >= dataset.num_users {
        return Err(Error::Config(format!(
            "asked for {num_test_users} drift users; {} of {} users qualify",
            scored.len(),
            dataset.num_users
        )));
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(num_test_users);
    let test_users: Vec<usize> = scored.iter().map(|&(u, _)| u).collect();
    let reindex = |recs: &[Record], j: usize| recs.iter().map(|r| Record { user: j, ..*r }).collect();
    let set1 = test_users
        .iter()
        .enumerate()
        .map(|(j, &u)| reindex(&halves[u].0, j))
        .collect();
    let set2 = test_users
        .iter()
        .enumerate()
        .map(|(j, &u)| reindex(&halves[u].1, j))
        .collect();
    let split = split_users(dataset, test_users, 1.0, 0)?;
    Ok(DriftSplit {
        test_users: split.test_users,
        set1,
        set2,
        similarity: scored.iter().map(|&(_, s)| s).collect(),
        switch_round,
        test: split.test,
        train: split.train,
    })
}
