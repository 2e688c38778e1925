use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::split::DriftSplit;
use crate::data::{InteractionDataset, Record, SatisfactionRule};
use crate::error::{Error, Result};

/// How unobserved `(user, item)` pairs are answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvProtocol {
    /// Every queried pair must be on record; candidates are the user's
    /// recorded items.
    FullyObserved,
    /// Missing pairs yield `θ = 0`, reward 0; candidates are all items.
    #[default]
    ZeroFill,
}

impl std::str::FromStr for EnvProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully_observed" => Ok(Self::FullyObserved),
            "zero_fill" => Ok(Self::ZeroFill),
            _ => Err(Error::Config(format!("unknown environment protocol {s:?}"))),
        }
    }
}

/// Which value the policy observes after each recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardSignal {
    #[default]
    Theta,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub theta: f64,
    /// Raw feedback value (0 for zero-filled pairs).
    pub reward: f64,
}

type UserTable = HashMap<usize, f64>;

/// Replays recorded feedback for a fixed set of users.
#[derive(Debug, Clone)]
pub struct ReplayEnvironment {
    num_items: usize,
    protocol: EnvProtocol,
    rule: SatisfactionRule,
    /// Ground truth per phase; phase `p` starts after `switch_rounds[p-1]`.
    phases: Vec<Vec<UserTable>>,
    switch_rounds: Vec<usize>,
}

fn tables(num_users: usize, records: impl IntoIterator<Item = Record>) -> Vec<UserTable> {
    let mut out = vec![UserTable::new(); num_users];
    for r in records {
        // Later duplicates overwrite earlier ones.
        out[r.user].insert(r.item, r.value);
    }
    out
}

impl ReplayEnvironment {
    pub fn new(dataset: &InteractionDataset, protocol: EnvProtocol) -> Self {
        Self {
            num_items: dataset.num_items,
            protocol,
            rule: dataset.satisfaction,
            phases: vec![tables(dataset.num_users, dataset.records.iter().copied())],
            switch_rounds: Vec::new(),
        }
    }

    /// Two-phase zero-fill environment: set 1 answers rounds
    /// `1..=switch_round`, set 2 answers the rest.
    pub fn drift(split: &DriftSplit) -> Self {
        let n = split.test.num_users;
        let set = |s: &Vec<Vec<Record>>| tables(n, s.iter().flatten().copied());
        Self {
            num_items: split.test.num_items,
            protocol: EnvProtocol::ZeroFill,
            rule: split.test.satisfaction,
            phases: vec![set(&split.set1), set(&split.set2)],
            switch_rounds: vec![split.switch_round],
        }
    }

    pub fn num_users(&self) -> usize {
        self.phases[0].len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn protocol(&self) -> EnvProtocol {
        self.protocol
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user < self.num_users() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "evaluation users",
                index: user,
                len: self.num_users(),
            })
        }
    }

    fn phase(&self, round: usize) -> usize {
        self.switch_rounds.iter().filter(|&&s| round > s).count()
    }

    /// Items eligible for recommendation to `user`, ascending.
    pub fn candidates(&self, user: usize) -> Result<Vec<usize>> {
        self.check_user(user)?;
        Ok(match self.protocol {
            EnvProtocol::ZeroFill => (0..self.num_items).collect(),
            EnvProtocol::FullyObserved => {
                let mut items: Vec<usize> = self.phases.iter().flat_map(|p| p[user].keys().copied()).collect();
                items.sort_unstable();
                items.dedup();
                items
            }
        })
    }

    /// Feedback for recommending `item` to `user` in round `round ≥ 1`.
    pub fn outcome(&self, user: usize, item: usize, round: usize) -> Result<Outcome> {
        self.check_user(user)?;
        if item >= self.num_items {
            return Err(Error::IndexOutOfRange {
                what: "items",
                index: item,
                len: self.num_items,
            });
        }
        match self.phases[self.phase(round)][user].get(&item) {
            Some(&v) => Ok(Outcome {
                theta: self.rule.theta(v),
                reward: v,
            }),
            None if self.protocol == EnvProtocol::ZeroFill => Ok(Outcome {
                theta: 0.0,
                reward: 0.0,
            }),
            None => Err(Error::Data(format!(
                "fully observed environment has no record for user {user}, item {item}"
            ))),
        }
    }

    /// Distinct satisfied items of `user` across all phases.
    pub fn satisfied_count(&self, user: usize) -> usize {
        let mut items: Vec<usize> = self
            .phases
            .iter()
            .flat_map(|p| p[user].iter())
            .filter(|(_, &v)| self.rule.is_satisfied(v))
            .map(|(&i, _)| i)
            .collect();
        items.sort_unstable();
        items.dedup();
        items.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> InteractionDataset {
        let recs = [(0, 0, 5.0), (0, 2, 3.0), (1, 1, 4.0)]
            .iter()
            .map(|&(user, item, value)| Record {
                user,
                item,
                value,
                timestamp: None,
            })
            .collect();
        InteractionDataset::from_records(2, 3, recs, SatisfactionRule::MOVIELENS)
    }

    #[test]
    fn zero_fill_answers_missing_pairs() {
        let env = ReplayEnvironment::new(&ds(), EnvProtocol::ZeroFill);
        assert_eq!(
            env.outcome(0, 1, 1).unwrap(),
            Outcome {
                theta: 0.0,
                reward: 0.0
            }
        );
        assert_eq!(
            env.outcome(0, 0, 1).unwrap(),
            Outcome {
                theta: 1.0,
                reward: 5.0
            }
        );
        assert_eq!(env.outcome(0, 2, 1).unwrap().theta, 0.0);
        assert_eq!(env.candidates(1).unwrap(), vec![0, 1, 2]);
        assert_eq!(env.satisfied_count(0), 1);
    }

    #[test]
    fn fully_observed_requires_records() {
        let env = ReplayEnvironment::new(&ds(), EnvProtocol::FullyObserved);
        assert!(env.outcome(0, 1, 1).is_err());
        assert_eq!(env.candidates(0).unwrap(), vec![0, 2]);
        assert!(env.candidates(2).is_err());
    }
}
