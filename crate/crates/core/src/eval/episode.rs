use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{ReplayEnvironment, RewardSignal};
use crate::error::{Error, Result};
use crate::policy::{EpisodeContext, Recommender};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub slate: Vec<usize>,
    pub theta: Vec<f64>,
    pub reward: Vec<f64>,
}

/// One user's episode; `rounds[t-1]` is round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLog {
    pub user: usize,
    pub rounds: Vec<RoundLog>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionLog {
    pub users: Vec<UserLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub horizon: usize,
    pub slate_size: usize,
    pub reward: RewardSignal,
    pub seed: u64,
}

/// Runs `horizon` rounds for one user. Every round the policy ranks all
/// not-yet-recommended candidates, the environment answers each slot, and
/// the feedback is applied in slate order.
pub fn run_episode(
    env: &ReplayEnvironment,
    policy: &dyn Recommender,
    user: usize,
    history: &[(usize, f64)],
    settings: &EpisodeSettings,
) -> Result<UserLog> {
    let k = settings.slate_size;
    let mut candidates = env.candidates(user)?;
    let needed = settings.horizon * k;
    if candidates.len() < needed {
        return Err(Error::InsufficientCandidates {
            needed,
            available: candidates.len(),
        });
    }
    let mut session = policy.start(&EpisodeContext {
        user,
        history,
        seed: settings.seed,
    })?;
    let mut rounds = Vec::with_capacity(settings.horizon);
    for t in 1..=settings.horizon {
        let slate = session.recommend(&candidates, k)?;
        let before = candidates.len();
        candidates.retain(|i| !slate.contains(i));
        if slate.len() != k || before - candidates.len() != k {
            return Err(Error::Data(format!(
                "policy {} returned a short, repeated or ineligible slate in round {t}",
                policy.name()
            )));
        }
        let mut theta = Vec::with_capacity(k);
        let mut reward = Vec::with_capacity(k);
        for &item in &slate {
            let o = env.outcome(user, item, t)?;
            theta.push(o.theta);
            reward.push(o.reward);
        }
        for (&item, (&th, &raw)) in slate.iter().zip(theta.iter().zip(&reward)) {
            let signal = match settings.reward {
                RewardSignal::Theta => th,
                RewardSignal::Raw => raw,
            };
            session.observe(item, signal)?;
        }
        rounds.push(RoundLog { slate, theta, reward });
    }
    Ok(UserLog { user, rounds })
}

/// Episodes for `users` in parallel; `histories[j]` belongs to `users[j]`
/// (empty slice for cold start). The output keeps the order of `users`.
pub fn run_policy(
    env: &ReplayEnvironment,
    policy: &dyn Recommender,
    users: &[usize],
    histories: Option<&[Vec<(usize, f64)>]>,
    settings: &EpisodeSettings,
) -> Result<InteractionLog> {
    if let Some(h) = histories {
        if h.len() != users.len() {
            return Err(Error::Dimension(format!(
                "{} histories for {} users",
                h.len(),
                users.len()
            )));
        }
    }
    let logs = users
        .par_iter()
        .enumerate()
        .map(|(j, &u)| {
            let history = histories.map_or(&[][..], |h| &h[j][..]);
            run_episode(env, policy, u, history, settings)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InteractionLog { users: logs })
}
