use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::loss::{ensure_finite, evaluate_unchecked, LossSettings, Observation};
use super::params::VariationalParams;
use super::Feedback;
use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::graph::{EmbeddingMatrix, InteractionGraph, PropagationSpec, Propagator};
use crate::rng::{seeded, streams};

/// Which signal the continuous model regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainingTarget {
    /// The satisfaction signal `θ` of the dataset's rule.
    #[default]
    Theta,
    /// The raw feedback value (rating or watch ratio).
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub dim: usize,
    pub prior_variance: f64,
    pub noise_variance: f64,
    pub feedback: Feedback,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once `|L_t − L_{t−1}| / |L_{t−1}|` drops below this.
    pub convergence_tol: f64,
    pub seed: u64,
    pub target: TrainingTarget,
    /// Heavy-ball coefficient; 0 is plain SGD.
    pub momentum: f64,
    /// Standard deviation of the random initial means. 0 starts every mean
    /// at the origin, a stationary point of the bilinear data term that SGD
    /// only leaves through sampling noise.
    pub init_scale: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            prior_variance: 1.0,
            noise_variance: 1.0,
            feedback: Feedback::Continuous,
            learning_rate: 0.5,
            batch_size: 256,
            max_epochs: 500,
            convergence_tol: 1e-4,
            seed: 0,
            target: TrainingTarget::Theta,
            momentum: 0.0,
            init_scale: 0.1,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("pretrain dim must be at least 1");
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return bad("prior_variance must be positive");
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be finite and non-negative");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be non-negative");
        }
        Ok(())
    }

    pub fn loss_settings(&self) -> LossSettings {
        LossSettings {
            feedback: self.feedback,
            prior_variance: self.prior_variance,
            noise_variance: self.noise_variance,
        }
    }

    /// Stable content hash of the configuration and propagation spec.
    pub fn hash_with(&self, spec: &PropagationSpec) -> String {
        let mut h = Sha256::new();
        h.update(format!("{self:?}|{spec:?}").as_bytes());
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Training observations for `dataset` under `config`'s feedback model.
pub fn observations(dataset: &InteractionDataset, config: &PretrainConfig) -> Vec<Observation> {
    let rule = dataset.satisfaction;
    dataset
        .records
        .iter()
        .map(|r| Observation {
            user: r.user,
            item: r.item,
            value: match (config.feedback, config.target) {
                (Feedback::Binary, _) => f64::from(u8::from(rule.is_satisfied(r.value))),
                (Feedback::Continuous, TrainingTarget::Theta) => rule.theta(r.value),
                (Feedback::Continuous, TrainingTarget::Raw) => r.value,
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Full objective after each epoch, under one frozen noise draw.
    pub epoch_losses: Vec<f64>,
    pub converged: bool,
}

impl TrainingReport {
    pub fn epochs(&self) -> usize {
        self.epoch_losses.len()
    }
}

/// Trained posteriors with the derived final embeddings `Φ*·G`.
#[derive(Debug, Clone)]
pub struct PretrainedModel {
    pub params: VariationalParams,
    pub spec: PropagationSpec,
    pub num_users: usize,
    pub num_items: usize,
    /// Column `j` is `Φ*·g_j`.
    pub final_embeddings: EmbeddingMatrix,
    pub provenance: Provenance,
    pub report: TrainingReport,
}

impl PretrainedModel {
    /// Rebuilds the derived embeddings for `params` on `graph`.
    pub fn from_params(
        params: VariationalParams,
        spec: PropagationSpec,
        graph: &InteractionGraph,
        provenance: Provenance,
        report: TrainingReport,
    ) -> Result<Self> {
        if params.num_nodes() != graph.num_nodes() {
            return Err(Error::Dimension(format!(
                "parameters cover {} nodes, graph has {}",
                params.num_nodes(),
                graph.num_nodes()
            )));
        }
        let propagator = Propagator::new(&graph.normalize_adjacency(), &spec)?;
        let final_embeddings = propagator.propagate(&params.mu)?;
        Ok(Self {
            params,
            spec,
            num_users: graph.num_users(),
            num_items: graph.num_items(),
            final_embeddings,
            provenance,
            report,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn phi_star(&self) -> &EmbeddingMatrix {
        &self.params.mu
    }

    pub fn scale_star(&self) -> EmbeddingMatrix {
        self.params.scales()
    }

    /// `e*_i = Φ*·g_i`.
    pub fn item_vector(&self, item: usize) -> &[f64] {
        self.final_embeddings.column(self.num_users + item)
    }

    /// `Φ*·g_u` for a pretrained user.
    pub fn user_vector(&self, user: usize) -> &[f64] {
        self.final_embeddings.column(user)
    }

    pub fn item_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.num_items).map(|i| self.item_vector(i).to_vec()).collect()
    }
}

pub fn export_item_vectors(model: &PretrainedModel) -> Vec<Vec<f64>> {
    model.item_vectors()
}

/// Mini-batch reparameterized SGD on the negative ELBO.
pub fn pretrain(
    dataset: &InteractionDataset,
    spec: &PropagationSpec,
    config: &PretrainConfig,
) -> Result<PretrainedModel> {
    config.validate()?;
    spec.validate()?;
    let graph = InteractionGraph::build(dataset)?;
    let propagator = Propagator::new(&graph.normalize_adjacency(), spec)?;
    let obs = observations(dataset, config);
    let mut params = VariationalParams::zeros(dataset.num_users, dataset.num_items, config.dim);
    if config.init_scale > 0.0 {
        let mut rng = seeded(config.seed, streams::PRETRAIN_INIT);
        for v in params.mu.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = config.init_scale * z;
        }
    }
    let report = train(&mut params, &obs, &propagator, config)?;
    let provenance = Provenance {
        config_hash: config.hash_with(spec),
        dataset_fingerprint: dataset.fingerprint(),
    };
    PretrainedModel::from_params(params, spec.clone(), &graph, provenance, report)
}

/// Runs the training loop in place on `params`.
pub fn train(
    params: &mut VariationalParams,
    obs: &[Observation],
    propagator: &Propagator,
    config: &PretrainConfig,
) -> Result<TrainingReport> {
    config.validate()?;
    let settings = config.loss_settings();
    let mut rng = seeded(config.seed, streams::PRETRAIN);
    // Common random numbers for the epoch objective.
    let monitor_noise = params.draw_noise(&mut seeded(config.seed, streams::PRETRAIN_MONITOR));
    let mut order: Vec<usize> = (0..obs.len()).collect();
    let total = obs.len().max(1) as f64;
    let mut vel_mu = EmbeddingMatrix::zeros(params.dim(), params.num_nodes());
    let mut vel_rho = vel_mu.clone();

    let mut epoch_losses = Vec::new();
    let mut prev = full_objective(params, &monitor_noise, obs, propagator, &settings, 0)?;
    let mut converged = false;
    let mut batch_buf = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = if order.is_empty() {
            // No data: the prior/entropy terms alone, once per epoch.
            vec![&[]]
        } else {
            order.chunks(config.batch_size).collect()
        };
        for (b, chunk) in batches.into_iter().enumerate() {
            batch_buf.clear();
            batch_buf.extend(chunk.iter().map(|&k| obs[k]));
            let noise = params.draw_noise(&mut rng);
            let size = batch_buf.len().max(1) as f64;
            let ev = evaluate_unchecked(params, &noise, &batch_buf, propagator, &settings, size / total, true)?;
            if !ev.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: ev.loss,
                });
            }
            // Mean per-record step so η does not depend on the batch size.
            let step = config.learning_rate / size;
            vel_mu.scale(config.momentum);
            vel_mu.axpy(step, &ev.grad_mu);
            vel_rho.scale(config.momentum);
            vel_rho.axpy(step, &ev.grad_rho);
            params.mu.axpy(-1.0, &vel_mu);
            params.rho.axpy(-1.0, &vel_rho);
            if !params.mu.is_finite() || !params.rho.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
        }
        let loss = full_objective(params, &monitor_noise, obs, propagator, &settings, epoch)?;
        epoch_losses.push(loss);
        let rel = (prev - loss).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = loss;
        if rel < config.convergence_tol {
            converged = true;
            break;
        }
    }
    log::debug!(
        "pretrain finished after {} epochs (converged: {converged})",
        epoch_losses.len()
    );
    Ok(TrainingReport {
        epoch_losses,
        converged,
    })
}

fn full_objective(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    obs: &[Observation],
    propagator: &Propagator,
    settings: &LossSettings,
    epoch: usize,
) -> Result<f64> {
    let ev = evaluate_unchecked(params, noise, obs, propagator, settings, 1.0, false)?;
    match ensure_finite(ev) {
        Ok(ev) => Ok(ev.loss),
        Err(_) => Err(Error::Diverged {
            epoch,
            batch: 0,
            loss: f64::NAN,
        }),
    }
}
