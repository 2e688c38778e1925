use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{SyntheticConfig, SyntheticEnv};
use super::theory::{lemma1_constants, sufficient_rounds, theorem2_bound, BoundParams, Lemma1Constants};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::online::{init_user, score_candidates, MetaPrior, PolicyConfig, ScoreMode, UserPosterior};
use crate::policy::{rank_top_k, ItemVectors};
use crate::rng::{seeded, streams, Rng};

/// Starting belief of a Bayesian lab policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabPrior {
    /// The environment's own `N(μ*, Σ*)`.
    True,
    /// Mean and covariance of `tasks` sampled task vectors, widened by `gamma`;
    /// resampled every replication.
    Meta { tasks: usize, gamma: f64 },
    /// `N(0, variance·I)`.
    Isotropic { variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabPolicy {
    /// Knows the task vector; zero regret by construction.
    Oracle,
    Random,
    /// Posterior-driven selection; the noise variance is the environment's.
    Bayes {
        #[serde(default)]
        name: Option<String>,
        prior: LabPrior,
        mode: ScoreMode,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_nu")]
        nu: f64,
    },
}

fn default_delta() -> f64 {
    0.01
}

fn default_nu() -> f64 {
    1.0
}

impl LabPolicy {
    pub fn ucb(prior: LabPrior) -> Self {
        LabPolicy::Bayes {
            name: None,
            prior,
            mode: ScoreMode::UcbTheorem1,
            delta: default_delta(),
            nu: default_nu(),
        }
    }

    /// Parses `oracle`, `random` or `<mode>_<prior>` with mode one of
    /// `ucb`, `linucb`, `thompson`, `greedy` and prior one of `true`, `meta`
    /// (100 tasks, γ = 0.1) or `wide` (variance 10). Labels round-trip.
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "oracle" => return Ok(LabPolicy::Oracle),
            "random" => return Ok(LabPolicy::Random),
            _ => {}
        }
        let bad = || Error::Config(format!("unknown lab policy {tag:?}"));
        let (mode, prior) = tag.split_once('_').ok_or_else(bad)?;
        let mode = match mode {
            "ucb" => ScoreMode::UcbTheorem1,
            "linucb" => ScoreMode::LinucbNu,
            "thompson" => ScoreMode::Thompson,
            "greedy" => ScoreMode::Greedy,
            _ => return Err(bad()),
        };
        let prior = match prior {
            "true" => LabPrior::True,
            "meta" => LabPrior::Meta { tasks: 100, gamma: 0.1 },
            "wide" => LabPrior::Isotropic { variance: 10.0 },
            _ => return Err(bad()),
        };
        Ok(LabPolicy::Bayes {
            name: None,
            prior,
            mode,
            delta: default_delta(),
            nu: default_nu(),
        })
    }

    pub fn label(&self) -> String {
        match self {
            LabPolicy::Oracle => "oracle".into(),
            LabPolicy::Random => "random".into(),
            LabPolicy::Bayes { name: Some(n), .. } => n.clone(),
            LabPolicy::Bayes { prior, mode, .. } => {
                let mode = match mode {
                    ScoreMode::UcbTheorem1 => "ucb",
                    ScoreMode::LinucbNu => "linucb",
                    ScoreMode::Thompson => "thompson",
                    ScoreMode::Greedy => "greedy",
                };
                let prior = match prior {
                    LabPrior::True => "true",
                    LabPrior::Meta { .. } => "meta",
                    LabPrior::Isotropic { .. } => "wide",
                };
                format!("{mode}_{prior}")
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let LabPolicy::Bayes { prior, delta, nu, .. } = self {
            if !(*delta > 0.0 && *delta < 1.0) || !(*nu >= 0.0 && nu.is_finite()) {
                return Err(Error::Config(format!(
                    "{}: δ must lie in (0, 1) and ν ≥ 0",
                    self.label()
                )));
            }
            match *prior {
                LabPrior::Meta { tasks, gamma } if tasks < 2 || !(gamma >= 0.0 && gamma.is_finite()) => {
                    return Err(Error::Config("meta prior needs ≥ 2 tasks and γ ≥ 0".into()));
                }
                LabPrior::Isotropic { variance } if !(variance > 0.0 && variance.is_finite()) => {
                    return Err(Error::Config("isotropic prior variance must be positive".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One replication's per-round expected regret `max_i θᵀe_i − θᵀe_{i_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepTrace {
    pub rep: usize,
    pub instant: Vec<f64>,
    pub tau: Option<usize>,
}

impl RepTrace {
    pub fn cumulative(&self) -> Vec<f64> {
        self.instant
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub policy: String,
    pub seed: u64,
    pub reps: Vec<RepTrace>,
    /// `mean_instant[t-1]` is round `t` averaged over replications.
    pub mean_instant: Vec<f64>,
    pub mean_cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn horizon(&self) -> usize {
        self.mean_instant.len()
    }

    pub fn replications(&self) -> usize {
        self.reps.len()
    }

    /// Mean cumulative regret after `t` rounds.
    pub fn cumulative_at(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|i| self.mean_cumulative.get(i)).copied()
    }

    /// Median sufficient-rounds value, `None` when fewer than half of the
    /// replications reach it.
    pub fn median_tau(&self) -> Option<usize> {
        let mut taus: Vec<usize> = self.reps.iter().filter_map(|r| r.tau).collect();
        if 2 * taus.len() < self.reps.len() || taus.is_empty() {
            return None;
        }
        taus.sort_unstable();
        // Unreached replications rank last, so the median is the middle
        // element of the full (padded) ordering.
        taus.get((self.reps.len() - 1) / 2).copied()
    }

    /// Rows `rep,t,inst_regret,cum_regret`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut csv::Writer<W>) -> Result<()> {
        out.write_record(["rep", "t", "inst_regret", "cum_regret"])?;
        for r in &self.reps {
            for (t, (inst, cum)) in r.instant.iter().zip(r.cumulative()).enumerate() {
                out.write_record([
                    r.rep.to_string(),
                    (t + 1).to_string(),
                    inst.to_string(),
                    cum.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

fn initial_posterior(env: &SyntheticEnv, prior: LabPrior, rng: &mut Rng) -> Result<UserPosterior> {
    let d = env.dim();
    let meta = match prior {
        LabPrior::True => MetaPrior {
            mu_meta: env.prior_mean.clone(),
            sigma_meta: env.prior_covariance.clone(),
            gamma: 0.0,
        },
        LabPrior::Meta { tasks, gamma } => {
            let sampled: Vec<Vector> = (0..tasks).map(|_| env.draw_task(rng)).collect();
            MetaPrior::from_vectors(sampled.iter().map(|v| v.as_slice()), d, gamma)?
        }
        LabPrior::Isotropic { variance } => MetaPrior::isotropic(d, variance)?,
    };
    init_user(&meta, &[], env.noise_variance())
}

fn run_replication(
    env: &SyntheticEnv,
    items: &ItemVectors,
    policy: &LabPolicy,
    horizon: usize,
    seed: u64,
    rep: usize,
) -> Result<RepTrace> {
    // Task and noise come from one stream, policy randomness and prior
    // tasks from others, so every policy faces the same tasks and noise.
    let base = streams::REGRET_BASE + 4 * (rep as u64 + 1);
    let mut world = seeded(seed, base);
    let mut choice = seeded(seed, base + 1);
    let mut prior_rng = seeded(seed, base + 2);
    let task = env.draw_task(&mut world);
    let values: Vec<f64> = env.items.iter().map(|e| task.dot(e)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ids: Vec<usize> = (0..env.items.len()).collect();

    let mut state = match policy {
        LabPolicy::Bayes { prior, .. } => Some(initial_posterior(env, *prior, &mut prior_rng)?),
        _ => None,
    };
    let config = match *policy {
        LabPolicy::Bayes { mode, delta, nu, .. } => PolicyConfig {
            mode,
            delta,
            nu,
            noise_variance: env.noise_variance(),
            seed: 0,
        },
        _ => PolicyConfig::default(),
    };
    let oracle_pick = rank_top_k(&ids, &values, 1)?[0];

    let mut instant = Vec::with_capacity(horizon);
    let mut chosen = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let pick = match (policy, state.as_ref()) {
            (LabPolicy::Oracle, _) => oracle_pick,
            (LabPolicy::Random, _) => choice.random_range(0..ids.len()),
            (LabPolicy::Bayes { .. }, Some(s)) => {
                let scores = score_candidates(s, &ids, items, &config, &mut choice)?;
                rank_top_k(&ids, &scores, 1)?[0]
            }
            (LabPolicy::Bayes { .. }, None) => unreachable!("Bayesian policies start with a posterior"),
        };
        let reward = env.reward(&task, pick, &mut world);
        if let Some(s) = state.as_mut() {
            s.update(&env.items[pick], reward, env.noise_variance())?;
        }
        instant.push(best - values[pick]);
        chosen.push(pick);
    }
    let tau = sufficient_rounds(
        chosen.iter().map(|&i| &env.items[i]),
        env.config.item_variance,
        env.dim(),
    );
    Ok(RepTrace { rep, instant, tau })
}

/// Bayesian regret curve over `replications` independent tasks, each
/// recommending from the full item set for `horizon` rounds.
pub fn empirical_regret(
    env: &SyntheticEnv,
    policy: &LabPolicy,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<RegretCurve> {
    if replications == 0 || horizon == 0 {
        return Err(Error::Config("replications and horizon must be at least 1".into()));
    }
    policy.validate()?;
    let items = ItemVectors::from_rows(env.dim(), env.items.iter().map(|e| e.as_slice().to_vec()).collect())?;
    let reps = (0..replications)
        .into_par_iter()
        .map(|r| run_replication(env, &items, policy, horizon, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let n = replications as f64;
    let mut mean_instant = vec![0.0; horizon];
    for r in &reps {
        for (m, v) in mean_instant.iter_mut().zip(&r.instant) {
            *m += v / n;
        }
    }
    let mut acc = 0.0;
    let mean_cumulative = mean_instant
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    Ok(RegretCurve {
        policy: policy.label(),
        seed,
        reps,
        mean_instant,
        mean_cumulative,
    })
}

/// A full lab run: one environment, several policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretExperiment {
    pub env: SyntheticConfig,
    pub policies: Vec<LabPolicy>,
    pub horizon: usize,
    pub replications: usize,
    pub checkpoints: Vec<usize>,
    /// Caller-supplied prior-mismatch factor in the analytic bound.
    pub k1: f64,
    /// Task count `M` used by the analytic overlay (`δ = 1/M`).
    pub num_tasks: usize,
    pub seed: u64,
}

impl Default for RegretExperiment {
    fn default() -> Self {
        Self {
            env: SyntheticConfig::default(),
            policies: vec![
                LabPolicy::Oracle,
                LabPolicy::Random,
                LabPolicy::ucb(LabPrior::True),
                LabPolicy::ucb(LabPrior::Meta { tasks: 100, gamma: 0.1 }),
                LabPolicy::ucb(LabPrior::Isotropic { variance: 10.0 }),
            ],
            horizon: 2000,
            replications: 200,
            checkpoints: vec![250, 500, 1000, 2000],
            k1: 0.0,
            num_tasks: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub horizon: usize,
    pub mean_cumulative: f64,
    pub per_round: f64,
    /// Analytic bound at the environment's parameters and the curve's
    /// median `τ`; absent when `τ` is not reached.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub replications: usize,
    pub median_tau: Option<usize>,
    pub tau_reached: f64,
    pub checkpoints: Vec<CheckpointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub seed: u64,
    pub acceptance_rate: f64,
    pub lemma1: Lemma1Constants,
    /// The bound at [`BoundParams::reference`].
    pub reference_bound: f64,
    pub policies: Vec<PolicySummary>,
}

impl RegretExperiment {
    pub fn bound_params(&self, horizon: usize, tau: Option<usize>) -> BoundParams {
        BoundParams {
            horizon,
            tau: tau.map_or(f64::INFINITY, |t| t as f64),
            dim: self.env.dim,
            num_items: self.env.num_items,
            num_tasks: self.num_tasks,
            lambda_bar: self.env.prior_eig_max,
            noise_std: self.env.noise_std,
            radius: self.env.item_radius,
            mean_bound: self.env.prior_mean_norm,
            k1: self.k1,
            delta: 1.0 / self.num_tasks as f64,
        }
    }

    pub fn run(&self) -> Result<(SyntheticEnv, Vec<RegretCurve>, RegretSummary)> {
        if self.policies.is_empty() {
            return Err(Error::Config("no lab policies configured".into()));
        }
        if self.num_tasks == 0 {
            return Err(Error::Config("num_tasks must be at least 1".into()));
        }
        let env = SyntheticEnv::sample(&self.env, self.seed)?;
        let mut checkpoints: Vec<usize> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&t| t >= 1 && t <= self.horizon)
            .chain([self.horizon])
            .collect();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        let mut curves = Vec::with_capacity(self.policies.len());
        let mut summaries = Vec::with_capacity(self.policies.len());
        for p in &self.policies {
            let curve = empirical_regret(&env, p, self.horizon, self.replications, self.seed)?;
            let tau = curve.median_tau();
            let reached = curve.reps.iter().filter(|r| r.tau.is_some()).count() as f64 / curve.replications() as f64;
            let points = checkpoints
                .iter()
                .map(|&t| {
                    let cum = curve.cumulative_at(t).unwrap_or(f64::NAN);
                    let bound = match tau {
                        Some(_) => Some(theorem2_bound(&self.bound_params(t, tau))?.value),
                        None => None,
                    };
                    Ok(CheckpointSummary {
                        horizon: t,
                        mean_cumulative: cum,
                        per_round: cum / t as f64,
                        bound,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            summaries.push(PolicySummary {
                policy: curve.policy.clone(),
                replications: curve.replications(),
                median_tau: tau,
                tau_reached: reached,
                checkpoints: points,
            });
            curves.push(curve);
        }
        let summary = RegretSummary {
            seed: self.seed,
            acceptance_rate: env.acceptance_rate,
            lemma1: lemma1_constants(self.num_tasks, self.env.dim, self.horizon, self.env.prior_eig_max)?,
            reference_bound: theorem2_bound(&BoundParams::reference())?.value,
            policies: summaries,
        };
        Ok((env, curves, summary))
    }
}
