//! Negative ELBO for the continuous (Gaussian) and binary (Bernoulli)
//! feedback models with analytic reparameterized gradients.
//!
//! For a batch `B` drawn from the training set `S` and a sample
//! `E = μ + softplus(ρ)∘ε`, the loss is
//!
//! ```text
//! Σ_{(u,i,r)∈B} ℓ(r, ē_u·ē_i)  +  (|B|/|S|) Σ_nodes [ e·e/(2σ₀²) − ½ Σ_k ln s_k ]
//! ```
//!
//! with `Ē = E·G`. Since `G` is symmetric, the gradient with respect to `E`
//! is the data gradient with respect to `Ē` propagated once more through `G`.

use serde::{Deserialize, Serialize};

use super::params::{sigmoid, softplus, VariationalParams};
use crate::error::{Error, Result};
use crate::graph::{dot, EmbeddingMatrix, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Continuous,
    Binary,
}

/// A training triple over user index `user` and item index `item`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSettings {
    pub feedback: Feedback,
    pub prior_variance: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone)]
pub struct LossEval {
    pub loss: f64,
    pub data_term: f64,
    pub node_term: f64,
    pub grad_mu: EmbeddingMatrix,
    pub grad_rho: EmbeddingMatrix,
}

/// Per-record loss `ℓ(r, x)` and `∂ℓ/∂x`.
#[inline]
fn record_loss(feedback: Feedback, noise_variance: f64, r: f64, x: f64) -> (f64, f64) {
    match feedback {
        Feedback::Continuous => {
            let resid = r - x;
            (resid * resid / (2.0 * noise_variance), -resid / noise_variance)
        }
        Feedback::Binary => {
            let sign = 2.0 * r - 1.0;
            let z = sign * x;
            // −ln σ(z) = softplus(−z)
            (softplus(-z), -sign * sigmoid(-z))
        }
    }
}

/// Evaluates the batch loss and its gradients with respect to `μ` and `ρ`
/// under fixed `noise`. `node_scale` multiplies the prior/entropy sum
/// (`|B|/|S|` during mini-batch training, 1 for the full objective).
pub fn evaluate(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    batch: &[Observation],
    propagator: &Propagator,
    settings: &LossSettings,
    node_scale: f64,
) -> Result<LossEval> {
    evaluate_unchecked(params, noise, batch, propagator, settings, node_scale, true).and_then(ensure_finite)
}

/// Loss value only; skips the backward pass.
pub fn objective(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    batch: &[Observation],
    propagator: &Propagator,
    settings: &LossSettings,
    node_scale: f64,
) -> Result<f64> {
    evaluate_unchecked(params, noise, batch, propagator, settings, node_scale, false)
        .and_then(ensure_finite)
        .map(|ev| ev.loss)
}

pub(crate) fn ensure_finite(ev: LossEval) -> Result<LossEval> {
    if ev.loss.is_finite() {
        Ok(ev)
    } else {
        Err(Error::Numerical(format!(
            "non-finite loss (data {}, node {})",
            ev.data_term, ev.node_term
        )))
    }
}

/// As [`evaluate`] but returns non-finite losses instead of failing.
pub(crate) fn evaluate_unchecked(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    batch: &[Observation],
    propagator: &Propagator,
    settings: &LossSettings,
    node_scale: f64,
    with_grad: bool,
) -> Result<LossEval> {
    if params.num_nodes() != propagator.num_nodes() {
        return Err(Error::Dimension(format!(
            "parameters cover {} nodes, graph has {}",
            params.num_nodes(),
            propagator.num_nodes()
        )));
    }
    let m = propagator.num_users();
    let e = params.sample(noise)?;
    let touched: Vec<usize> = batch.iter().flat_map(|o| [o.user, m + o.item]).collect();
    if let Some(&bad) = touched.iter().find(|&&j| j >= params.num_nodes()) {
        return Err(Error::IndexOutOfRange {
            what: "nodes",
            index: bad,
            len: params.num_nodes(),
        });
    }
    let e_bar = propagator.propagate_to(&e, &touched)?;

    let (d, n) = (params.dim(), params.num_nodes());
    let mut grad_bar = EmbeddingMatrix::zeros(d, n);
    let mut data_term = 0.0;
    for o in batch {
        let (u, i) = (o.user, m + o.item);
        let x = dot(e_bar.column(u), e_bar.column(i));
        let (l, dl) = record_loss(settings.feedback, settings.noise_variance, o.value, x);
        data_term += l;
        if !with_grad {
            continue;
        }
        for k in 0..d {
            let (eu, ei) = (e_bar.column(u)[k], e_bar.column(i)[k]);
            grad_bar.column_mut(u)[k] += dl * ei;
            grad_bar.column_mut(i)[k] += dl * eu;
        }
    }
    let mut grad_e = if with_grad {
        propagator.propagate_from(&grad_bar, &touched)?
    } else {
        grad_bar
    };

    let inv_prior = 1.0 / settings.prior_variance;
    let mut node_term = 0.0;
    let mut grad_rho = EmbeddingMatrix::zeros(d, if with_grad { n } else { 0 });
    if !with_grad {
        for (&ev, &r) in e.as_slice().iter().zip(params.rho.as_slice()) {
            node_term += 0.5 * ev * ev * inv_prior - 0.5 * softplus(r).ln();
        }
    } else {
        let ge = grad_e.as_mut_slice();
        let gr = grad_rho.as_mut_slice();
        let es = e.as_slice();
        let rho = params.rho.as_slice();
        let eps = noise.as_slice();
        for idx in 0..d * n {
            let s = softplus(rho[idx]);
            let ds = sigmoid(rho[idx]);
            node_term += 0.5 * es[idx] * es[idx] * inv_prior - 0.5 * s.ln();
            ge[idx] += node_scale * es[idx] * inv_prior;
            gr[idx] = ge[idx] * eps[idx] * ds - node_scale * 0.5 * ds / s;
        }
    }
    node_term *= node_scale;
    let loss = data_term + node_term;
    Ok(LossEval {
        loss,
        data_term,
        node_term,
        grad_mu: grad_e,
        grad_rho,
    })
}

/// Gaussian-likelihood loss.
pub fn loss_continuous(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    batch: &[Observation],
    propagator: &Propagator,
    prior_variance: f64,
    noise_variance: f64,
    node_scale: f64,
) -> Result<LossEval> {
    let settings = LossSettings {
        feedback: Feedback::Continuous,
        prior_variance,
        noise_variance,
    };
    evaluate(params, noise, batch, propagator, &settings, node_scale)
}

/// Bernoulli-likelihood loss; `value` must be 0 or 1.
pub fn loss_binary(
    params: &VariationalParams,
    noise: &EmbeddingMatrix,
    batch: &[Observation],
    propagator: &Propagator,
    prior_variance: f64,
    node_scale: f64,
) -> Result<LossEval> {
    if let Some(o) = batch.iter().find(|o| o.value != 0.0 && o.value != 1.0) {
        return Err(Error::Data(format!(
            "binary feedback needs r ∈ {{0,1}}, got {} for ({}, {})",
            o.value, o.user, o.item
        )));
    }
    let settings = LossSettings {
        feedback: Feedback::Binary,
        prior_variance,
        noise_variance: 1.0,
    };
    evaluate(params, noise, batch, propagator, &settings, node_scale)
}
