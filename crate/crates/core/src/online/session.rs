use super::meta::MetaPrior;
use super::posterior::{init_user, UserPosterior};
use super::select::{select, PolicyConfig};
use crate::error::Result;
use crate::linalg::Vector;
use crate::policy::{episode_seed, EpisodeContext, ItemVectors, Recommender, Session};
use crate::rng::{seeded, streams, Rng};

/// Bayesian linear bandit over fixed pretrained item vectors.
#[derive(Debug, Clone)]
pub struct IgcfPolicy {
    name: String,
    items: ItemVectors,
    prior: MetaPrior,
    config: PolicyConfig,
}

impl IgcfPolicy {
    pub fn new(name: impl Into<String>, items: ItemVectors, prior: MetaPrior, config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        if prior.dim() != items.dim() {
            return Err(crate::Error::Dimension(format!(
                "prior has dimension {}, item vectors {}",
                prior.dim(),
                items.dim()
            )));
        }
        // Surface a singular prior at construction rather than per episode.
        prior.prior_precision()?;
        Ok(Self {
            name: name.into(),
            items,
            prior,
            config,
        })
    }

    pub fn items(&self) -> &ItemVectors {
        &self.items
    }

    pub fn prior(&self) -> &MetaPrior {
        &self.prior
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Initial posterior for a user with the given `(item, reward)` history.
    pub fn initial_state(&self, history: &[(usize, f64)]) -> Result<UserPosterior> {
        let rows = history
            .iter()
            .map(|&(i, r)| Ok((self.items.get(i)?.clone(), r)))
            .collect::<Result<Vec<(Vector, f64)>>>()?;
        init_user(&self.prior, &rows, self.config.noise_variance)
    }
}

pub struct IgcfSession<'a> {
    policy: &'a IgcfPolicy,
    state: UserPosterior,
    rng: Rng,
}

impl IgcfSession<'_> {
    pub fn state(&self) -> &UserPosterior {
        &self.state
    }
}

impl Session for IgcfSession<'_> {
    fn recommend(&mut self, candidates: &[usize], k: usize) -> Result<Vec<usize>> {
        let p = self.policy;
        select(&self.state, candidates, &p.items, &p.config, k, &mut self.rng)
    }

    fn observe(&mut self, item: usize, reward: f64) -> Result<()> {
        let e = self.policy.items.get(item)?;
        self.state.update(e, reward, self.policy.config.noise_variance)
    }
}

impl Recommender for IgcfPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn start<'a>(&'a self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Session + 'a>> {
        Ok(Box::new(IgcfSession {
            policy: self,
            state: self.initial_state(ctx.history)?,
            rng: seeded(
                episode_seed(ctx.seed, self.config.seed),
                streams::EPISODE_BASE + ctx.user as u64,
            ),
        }))
    }
}
