//! Online phase: meta prior, conjugate posterior updates and slate
//! selection over fixed pretrained item vectors.

mod meta;
mod posterior;
mod select;
mod session;

pub use meta::{build_meta_prior, resolve_prior, MetaPrior, PriorSpec};
pub use posterior::{gamma_from_lambda, gamma_t, init_user, mutual_information, update_posterior, UserPosterior};
pub use select::{sample_posterior, score_candidates, select, ucb_score, PolicyConfig, ScoreMode};
pub use session::{IgcfPolicy, IgcfSession};
