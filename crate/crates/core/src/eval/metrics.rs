use serde::{Deserialize, Serialize};

use super::episode::{InteractionLog, UserLog};
use crate::error::{Error, Result};

fn check_horizon(log: &UserLog, horizon: usize) -> Result<()> {
    if log.rounds.len() < horizon {
        return Err(Error::Config(format!(
            "horizon {horizon} exceeds user {}'s {} logged rounds",
            log.user,
            log.rounds.len()
        )));
    }
    Ok(())
}

fn theta_sum(log: &UserLog, horizon: usize) -> f64 {
    log.rounds[..horizon].iter().flat_map(|r| &r.theta).sum()
}

/// Mean over users of the `θ` collected in the first `horizon` rounds.
pub fn precision_at(logs: &InteractionLog, horizon: usize) -> Result<f64> {
    if logs.users.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for log in &logs.users {
        check_horizon(log, horizon)?;
        total += theta_sum(log, horizon);
    }
    Ok(total / logs.users.len() as f64)
}

/// Mean over users of collected `θ` divided by the user's satisfied-item
/// count (indexed by `UserLog::user`). Users with no satisfied items are
/// left out.
pub fn recall_at(logs: &InteractionLog, horizon: usize, satisfied: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for log in &logs.users {
        check_horizon(log, horizon)?;
        let n = *satisfied.get(log.user).ok_or(Error::IndexOutOfRange {
            what: "satisfied counts",
            index: log.user,
            len: satisfied.len(),
        })?;
        if n == 0 {
            log::warn!("user {} has no satisfied items; excluded from recall", log.user);
            continue;
        }
        total += theta_sum(log, horizon) / n as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

fn dcg(thetas: impl IntoIterator<Item = f64>) -> f64 {
    thetas
        .into_iter()
        .enumerate()
        .map(|(j, t)| (t.exp2() - 1.0) / ((j + 2) as f64).log2())
        .sum()
}

/// `nDCG_k` of one slate's feedback, normalized by the best ordering of the
/// same feedback. A round whose ideal DCG is 0 scores 0.
pub fn ndcg_round(thetas: &[f64], k: usize) -> f64 {
    let top = &thetas[..k.min(thetas.len())];
    let mut ideal = thetas.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    ideal.truncate(k);
    let z = dcg(ideal);
    if z > 0.0 {
        dcg(top.iter().copied()) / z
    } else {
        0.0
    }
}

/// Mean over users of the summed per-round `nDCG_k` over `horizon` rounds.
pub fn ndcg_at(logs: &InteractionLog, k: usize, horizon: usize) -> Result<f64> {
    if logs.users.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for log in &logs.users {
        check_horizon(log, horizon)?;
        for r in &log.rounds[..horizon] {
            if r.theta.len() < k {
                return Err(Error::Config(format!(
                    "nDCG_{k} needs slates of at least {k} items, got {}",
                    r.theta.len()
                )));
            }
            total += ndcg_round(&r.theta, k);
        }
    }
    Ok(total / logs.users.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub horizon: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// Metrics at each checkpoint `≤` the logged horizon, with `nDCG_k` over
/// the full slate.
pub fn summarize(logs: &InteractionLog, checkpoints: &[usize], satisfied: &[usize]) -> Result<Vec<MetricPoint>> {
    let k = logs
        .users
        .iter()
        .flat_map(|u| u.rounds.iter())
        .map(|r| r.theta.len())
        .min()
        .unwrap_or(1);
    checkpoints
        .iter()
        .map(|&h| {
            Ok(MetricPoint {
                horizon: h,
                precision: precision_at(logs, h)?,
                recall: recall_at(logs, h, satisfied)?,
                ndcg: ndcg_at(logs, k, h)?,
            })
        })
        .collect()
}
