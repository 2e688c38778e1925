//! End-to-end offline experiments: split, pretrain, build policies, replay.

use serde::{Deserialize, Serialize};

use super::env::{EnvProtocol, ReplayEnvironment, RewardSignal};
use super::episode::{run_policy, EpisodeSettings, InteractionLog};
use super::metrics::{summarize, MetricPoint};
use super::split::{build_drift_split, cold_start_split, train_subset, DriftSplit};
use crate::baselines::{IcfMode, IcfPolicy, PopPolicy, RandomPolicy};
use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, PropagationSpec};
use crate::online::{resolve_prior, IgcfPolicy, PolicyConfig, PriorSpec};
use crate::policy::{ItemVectors, Recommender};
use crate::pretrain::{pretrain, PretrainConfig, PretrainedModel, Provenance, Snapshot, TrainingReport};

/// Which recorded interactions seed a warm-start user's posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmHistory {
    None,
    /// The user's earlier time half.
    #[default]
    Set1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    /// Most active users held out with no history; `k = 1` by convention,
    /// `topk` is the same split with larger slates.
    ColdStart {
        test_users: usize,
        train_fraction: f64,
    },
    TopK {
        test_users: usize,
        train_fraction: f64,
    },
    /// Most drifted users held out; ground truth switches after
    /// `switch_round`.
    Drift {
        test_users: usize,
        train_fraction: f64,
        switch_round: usize,
        #[serde(default)]
        warm_history: WarmHistory,
    },
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec::ColdStart {
            test_users: 200,
            train_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Igcf {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        prior: PriorSpec,
        #[serde(default)]
        policy: PolicyConfig,
    },
    /// Ridge ICF over depth-0 pretrained item vectors.
    Icf {
        #[serde(default)]
        name: Option<String>,
        mode: IcfMode,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        noise_variance: f64,
    },
    Mf {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        noise_variance: f64,
    },
    Pop,
    Random,
}

fn one() -> f64 {
    1.0
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Igcf { name: Some(n), .. } | PolicySpec::Icf { name: Some(n), .. } => n.clone(),
            PolicySpec::Igcf { .. } => "igcf".into(),
            PolicySpec::Icf {
                mode: IcfMode::Ucb { .. },
                ..
            } => "icf_ucb".into(),
            PolicySpec::Icf {
                mode: IcfMode::Thompson,
                ..
            } => "icf_ts".into(),
            PolicySpec::Mf { .. } => "mf".into(),
            PolicySpec::Pop => "pop".into(),
            PolicySpec::Random => "random".into(),
        }
    }

    fn needs_flat_model(&self) -> bool {
        matches!(self, PolicySpec::Icf { .. } | PolicySpec::Mf { .. })
    }

    /// Parses a short policy tag as accepted on the command line.
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "igcf" => PolicySpec::Igcf {
                name: None,
                prior: PriorSpec::default(),
                policy: PolicyConfig::default(),
            },
            "icf_ucb" => PolicySpec::Icf {
                name: None,
                mode: IcfMode::Ucb { c: 1.0 },
                lambda: 1.0,
                noise_variance: 1.0,
            },
            "icf_ts" => PolicySpec::Icf {
                name: None,
                mode: IcfMode::Thompson,
                lambda: 1.0,
                noise_variance: 1.0,
            },
            "mf" => PolicySpec::Mf {
                lambda: 1.0,
                noise_variance: 1.0,
            },
            "pop" => PolicySpec::Pop,
            "random" => PolicySpec::Random,
            _ => return Err(Error::Config(format!("unknown policy {tag:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub protocol: ProtocolSpec,
    pub environment: EnvProtocol,
    pub propagation: PropagationSpec,
    pub pretrain: PretrainConfig,
    pub policies: Vec<PolicySpec>,
    pub horizon: usize,
    pub slate_size: usize,
    /// Horizons at which metrics are reported; the full horizon is always
    /// included.
    pub checkpoints: Vec<usize>,
    pub reward: RewardSignal,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            protocol: ProtocolSpec::default(),
            environment: EnvProtocol::ZeroFill,
            propagation: PropagationSpec::lightgcn(3),
            pretrain: PretrainConfig::default(),
            policies: ["igcf", "icf_ucb", "pop", "random"]
                .iter()
                .map(|t| PolicySpec::from_tag(t).expect("known tag"))
                .collect(),
            horizon: 120,
            slate_size: 1,
            checkpoints: vec![10, 20, 40, 120],
            reward: RewardSignal::Theta,
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        self.pretrain.validate()?;
        if self.horizon == 0 || self.slate_size == 0 {
            return Err(Error::Config("horizon and slate size must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies configured".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicySpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("policy names must be unique; set `name`".into()));
        }
        if let ProtocolSpec::Drift { switch_round, .. } = self.protocol {
            if switch_round >= self.horizon {
                return Err(Error::Config(format!(
                    "switch round {switch_round} must precede the horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Sorted checkpoints within the horizon, always ending at the horizon.
    pub fn resolved_checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .checkpoints
            .iter()
            .copied()
            .filter(|&h| h >= 1 && h <= self.horizon)
            .chain([self.horizon])
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Split data, environment and per-user warm histories for a protocol.
#[derive(Debug, Clone)]
pub struct PreparedProtocol {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
    /// Test users as indices into the source dataset.
    pub test_users: Vec<usize>,
    pub env: ReplayEnvironment,
    pub histories: Option<Vec<Vec<(usize, f64)>>>,
    pub satisfied: Vec<usize>,
    pub drift: Option<DriftSplit>,
}

pub fn prepare_protocol(dataset: &InteractionDataset, spec: &ExperimentSpec) -> Result<PreparedProtocol> {
    let (train, test, test_users, env, histories, drift) = match spec.protocol {
        ProtocolSpec::ColdStart {
            test_users,
            train_fraction,
        }
        | ProtocolSpec::TopK {
            test_users,
            train_fraction,
        } => {
            let s = cold_start_split(dataset, test_users, train_fraction, spec.seed)?;
            let env = ReplayEnvironment::new(&s.test, spec.environment);
            (s.train, s.test, s.test_users, env, None, None)
        }
        ProtocolSpec::Drift {
            test_users,
            train_fraction,
            switch_round,
            warm_history,
        } => {
            let s = build_drift_split(dataset, test_users, switch_round)?;
            let env = ReplayEnvironment::drift(&s);
            let histories = match warm_history {
                WarmHistory::None => None,
                WarmHistory::Set1 => Some(
                    s.set1
                        .iter()
                        .map(|recs| {
                            recs.iter()
                                .map(|r| {
                                    let v = match spec.reward {
                                        RewardSignal::Theta => s.test.satisfaction.theta(r.value),
                                        RewardSignal::Raw => r.value,
                                    };
                                    (r.item, v)
                                })
                                .collect()
                        })
                        .collect(),
                ),
            };
            let train = train_subset(&s.train, train_fraction, spec.seed)?;
            (train, s.test.clone(), s.test_users.clone(), env, histories, Some(s))
        }
    };
    let satisfied = (0..env.num_users()).map(|u| env.satisfied_count(u)).collect();
    Ok(PreparedProtocol {
        train,
        test,
        test_users,
        env,
        histories,
        satisfied,
        drift,
    })
}

/// Restores a model from a snapshot taken on `train`'s graph.
pub fn model_from_snapshot(snapshot: Snapshot, train: &InteractionDataset) -> Result<PretrainedModel> {
    if snapshot.num_users != train.num_users || snapshot.num_items != train.num_items {
        return Err(Error::Config(format!(
            "snapshot covers {}×{} users×items, training split has {}×{}",
            snapshot.num_users, snapshot.num_items, train.num_users, train.num_items
        )));
    }
    let graph = InteractionGraph::build(train)?;
    let provenance = Provenance {
        config_hash: "snapshot".into(),
        dataset_fingerprint: train.fingerprint(),
    };
    let report = TrainingReport {
        epoch_losses: Vec::new(),
        converged: true,
    };
    PretrainedModel::from_params(snapshot.params, snapshot.spec, &graph, provenance, report)
}

#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub name: String,
    pub log: InteractionLog,
    pub metrics: Vec<MetricPoint>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub prepared: PreparedProtocol,
    pub model: PretrainedModel,
    pub flat_model: Option<PretrainedModel>,
    pub results: Vec<PolicyResult>,
}

/// Builds the recommender described by `spec`.
pub fn build_policy(
    spec: &PolicySpec,
    model: &PretrainedModel,
    flat_model: Option<&PretrainedModel>,
    train: &InteractionDataset,
    seed: u64,
) -> Result<Box<dyn Recommender>> {
    let flat = || {
        flat_model
            .map(ItemVectors::from_model)
            .ok_or_else(|| Error::Config(format!("{} needs depth-0 item vectors", spec.label())))
    };
    Ok(match spec {
        PolicySpec::Igcf { prior, policy, .. } => {
            let prior = resolve_prior(prior, model)?;
            Box::new(IgcfPolicy::new(
                spec.label(),
                ItemVectors::from_model(model),
                prior,
                *policy,
            )?)
        }
        PolicySpec::Icf {
            mode,
            lambda,
            noise_variance,
            ..
        } => Box::new(IcfPolicy::new(
            spec.label(),
            flat()?,
            *lambda,
            *noise_variance,
            *mode,
            seed,
        )?),
        PolicySpec::Mf { lambda, noise_variance } => Box::new(IcfPolicy::mf(flat()?, *lambda, *noise_variance)?),
        PolicySpec::Pop => Box::new(PopPolicy::from_dataset(train)),
        PolicySpec::Random => Box::new(RandomPolicy { seed }),
    })
}

/// Runs every configured policy on the protocol. `model` replaces the
/// pretraining step when given (it must be trained on the same split).
pub fn run_experiment(
    dataset: &InteractionDataset,
    spec: &ExperimentSpec,
    model: Option<PretrainedModel>,
) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let prepared = prepare_protocol(dataset, spec)?;
    let model = match model {
        Some(m) => {
            if m.num_users != prepared.train.num_users || m.num_items != prepared.train.num_items {
                return Err(Error::Config("supplied model does not match the training split".into()));
            }
            m
        }
        None => pretrain(&prepared.train, &spec.propagation, &spec.pretrain)?,
    };
    let flat_model = if spec.policies.iter().any(PolicySpec::needs_flat_model) {
        if model.spec.depth == 0 {
            Some(model.clone())
        } else {
            Some(pretrain(
                &prepared.train,
                &PropagationSpec::lightgcn(0),
                &spec.pretrain,
            )?)
        }
    } else {
        None
    };
    let settings = EpisodeSettings {
        horizon: spec.horizon,
        slate_size: spec.slate_size,
        reward: spec.reward,
        seed: spec.seed,
    };
    let users: Vec<usize> = (0..prepared.env.num_users()).collect();
    let checkpoints = spec.resolved_checkpoints();
    let mut results = Vec::with_capacity(spec.policies.len());
    for p in &spec.policies {
        let policy = build_policy(p, &model, flat_model.as_ref(), &prepared.train, spec.seed)?;
        let log = run_policy(
            &prepared.env,
            policy.as_ref(),
            &users,
            prepared.histories.as_deref(),
            &settings,
        )?;
        let metrics = summarize(&log, &checkpoints, &prepared.satisfied)?;
        log::info!(
            "{}: precision@{} = {:.4}",
            p.label(),
            spec.horizon,
            metrics.last().map_or(0.0, |m| m.precision)
        );
        results.push(PolicyResult {
            name: p.label(),
            log,
            metrics,
        });
    }
    Ok(ExperimentOutcome {
        prepared,
        model,
        flat_model,
        results,
    })
}
