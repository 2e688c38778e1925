//! Offline replay evaluation: environments, protocols, episodes and
//! cumulative metrics.

mod env;
mod episode;
mod experiment;
mod metrics;
mod report;
mod split;

pub use env::{EnvProtocol, Outcome, ReplayEnvironment, RewardSignal};
pub use episode::{run_episode, run_policy, EpisodeSettings, InteractionLog, RoundLog, UserLog};
pub use experiment::{
    build_policy, model_from_snapshot, prepare_protocol, run_experiment, ExperimentOutcome, ExperimentSpec,
    PolicyResult, PolicySpec, PreparedProtocol, ProtocolSpec, WarmHistory,
};
pub use metrics::{ndcg_at, ndcg_round, precision_at, recall_at, summarize, MetricPoint};
pub use report::{write_log_csv, LOG_CSV_HEADER};
pub use split::{
    build_drift_split, cold_start_split, cosine_similarity, time_halves, train_subset, DriftSplit, UserSplit,
};
