//! Synthetic Gaussian linear bandit for probing confidence and regret
//! behaviour against the analytic bounds.

mod env;
mod regret;
mod theory;

pub use env::{sample_truncated_gaussian, SyntheticConfig, SyntheticEnv, MIN_ACCEPTANCE};
pub use regret::{
    empirical_regret, CheckpointSummary, LabPolicy, LabPrior, PolicySummary, RegretCurve, RegretExperiment,
    RegretSummary, RepTrace,
};
pub use theory::{lemma1_constants, sufficient_rounds, theorem2_bound, BoundParams, Lemma1Constants, RegretBound};
