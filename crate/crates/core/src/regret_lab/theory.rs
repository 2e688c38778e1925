use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// First round `t` (1-based) at which `λ_min(Σ_{s≤t} e_s e_sᵀ) ≥ floor·d/2`,
/// or `None` if the design never gets there.
pub fn sufficient_rounds<'a, I>(chosen: I, eig_floor: f64, dim: usize) -> Option<usize>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let threshold = eig_floor * dim as f64 / 2.0;
    let mut design = Matrix::zeros(dim, dim);
    let mut trace = 0.0;
    for (t, e) in chosen.into_iter().enumerate() {
        design.ger(1.0, e, e, 1.0);
        trace += e.norm_squared();
        // λ_min ≤ trace/d, so the eigensolve is skipped until it could pass.
        if trace < threshold * dim as f64 {
            continue;
        }
        if SymmetricEigen::new(design.clone()).eigenvalues.min() >= threshold {
            return Some(t + 1);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Constants {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    /// Whether `M ≥ 5d + 2 ln(dMT/3)`.
    pub feasible: bool,
}

/// Meta-prior widening and good-event radii for `M` tasks.
pub fn lemma1_constants(num_tasks: usize, dim: usize, horizon: usize, lambda_bar: f64) -> Result<Lemma1Constants> {
    if num_tasks == 0 || dim == 0 || horizon == 0 {
        return Err(Error::Config(
            "task count, dimension and horizon must be at least 1".into(),
        ));
    }
    let (m, d, t) = (num_tasks as f64, dim as f64, horizon as f64);
    let complexity = 5.0 * d + 2.0 * (d * m * t / 3.0).ln();
    Ok(Lemma1Constants {
        gamma: 32.0 * lambda_bar * (complexity / m).sqrt(),
        c1: lambda_bar * (2.0 * d + 3.0 * (d * m * t).ln()),
        c2: (64.0 * lambda_bar).powi(2) * complexity,
        feasible: m >= complexity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub horizon: usize,
    /// Sufficient rounds; use `f64::INFINITY` when never reached.
    pub tau: f64,
    pub dim: usize,
    pub num_items: usize,
    pub num_tasks: usize,
    pub lambda_bar: f64,
    pub noise_std: f64,
    /// Item support radius.
    pub radius: f64,
    /// Bound on the prior mean norm.
    pub mean_bound: f64,
    pub k1: f64,
    pub delta: f64,
}

impl BoundParams {
    /// The reference configuration used as a fixture throughout the tests.
    pub fn reference() -> Self {
        Self {
            horizon: 1000,
            tau: 20.0,
            dim: 4,
            num_items: 50,
            num_tasks: 100,
            lambda_bar: 1.0,
            noise_std: 1.0,
            radius: 1.0,
            mean_bound: 1.0,
            k1: 0.0,
            delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    pub gamma: f64,
    pub b: f64,
    pub k2: f64,
    pub c_bad: f64,
    pub value: f64,
}

/// Analytic Bayesian regret bound for the meta-initialized UCB loop.
pub fn theorem2_bound(p: &BoundParams) -> Result<RegretBound> {
    let finite = [p.lambda_bar, p.noise_std, p.radius, p.mean_bound, p.k1, p.delta]
        .iter()
        .all(|v| v.is_finite());
    if !finite || p.tau.is_nan() {
        return Err(Error::Config("regret bound parameters must be finite".into()));
    }
    if p.horizon == 0 || p.dim == 0 || p.num_items == 0 || p.num_tasks == 0 {
        return Err(Error::Config(
            "horizon, dimension, item and task counts must be at least 1".into(),
        ));
    }
    if !(p.lambda_bar > 0.0 && p.noise_std > 0.0) {
        return Err(Error::Config("λ̄ and the noise std must be positive".into()));
    }
    let (t, d, n, m) = (p.horizon as f64, p.dim as f64, p.num_items as f64, p.num_tasks as f64);
    let s2 = p.noise_std * p.noise_std;
    let gamma = 4.0 * (p.lambda_bar / (p.lambda_bar / s2).ln_1p() * (4.0 * n * t).ln()).sqrt();
    let b = p.radius * (p.mean_bound + (p.lambda_bar * d).sqrt());
    let k2 = 2.0 * b;
    let c_bad = 22.0 * p.radius * (p.mean_bound + (4.0 * p.lambda_bar * (d * d * m * t).ln()).sqrt());
    let main = gamma * (0.5 * t * d * (p.lambda_bar * t / s2).ln_1p()).sqrt() + b;
    let value = (1.0 + p.k1) * main + c_bad * p.delta / d.sqrt() + k2 * p.tau;
    Ok(RegretBound {
        gamma,
        b,
        k2,
        c_bad,
        value,
    })
}
