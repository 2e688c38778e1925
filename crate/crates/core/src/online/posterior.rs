use nalgebra::{Cholesky, Dyn};

use super::meta::MetaPrior;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, inverse_quad_form, symmetrize, Matrix, Vector};

/// Gaussian belief over one user's feature vector, kept in precision form.
#[derive(Debug, Clone)]
pub struct UserPosterior {
    precision: Matrix,
    /// `Σ_t^{-1} μ_t`.
    shift: Vector,
    mu: Vector,
    chol: Cholesky<f64, Dyn>,
    round: usize,
}

impl UserPosterior {
    /// Posterior with the given natural parameters.
    pub fn from_natural(mut precision: Matrix, shift: Vector) -> Result<Self> {
        if precision.nrows() != shift.len() || !precision.is_square() {
            return Err(Error::Dimension(format!(
                "precision {}×{} with shift of length {}",
                precision.nrows(),
                precision.ncols(),
                shift.len()
            )));
        }
        symmetrize(&mut precision);
        let chol = cholesky(&precision, "posterior precision")?;
        let mu = chol.solve(&shift);
        Ok(Self {
            precision,
            shift,
            mu,
            chol,
            round: 0,
        })
    }

    /// `N(mean, covariance)`.
    pub fn from_moments(mean: Vector, covariance: &Matrix) -> Result<Self> {
        let c = cholesky(covariance, "prior covariance")?;
        let mut precision = c.inverse();
        symmetrize(&mut precision);
        let shift = &precision * &mean;
        Self::from_natural(precision, shift)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mu
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    /// Lower Cholesky factor `L` of the precision, `Σ_t^{-1} = L Lᵀ`.
    pub fn precision_factor(&self) -> Matrix {
        self.chol.l()
    }

    pub fn covariance(&self) -> Matrix {
        let mut c = self.chol.inverse();
        symmetrize(&mut c);
        c
    }

    /// Number of feedbacks absorbed since initialization.
    pub fn round(&self) -> usize {
        self.round
    }

    /// `eᵀ Σ_t e`.
    pub fn variance_along(&self, e: &Vector) -> f64 {
        inverse_quad_form(&self.chol, e)
    }

    /// Rank-one conjugate update with one `(e, r)` observation.
    pub fn update(&mut self, e: &Vector, reward: f64, noise_variance: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::Data(format!("non-finite reward {reward}")));
        }
        if e.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "item vector of length {}, posterior has dimension {}",
                e.len(),
                self.dim()
            )));
        }
        let w = 1.0 / noise_variance;
        self.precision.ger(w, e, e, 1.0);
        self.shift.axpy(w * reward, e, 1.0);
        self.chol = cholesky(&self.precision, "posterior precision")?;
        self.mu = self.chol.solve(&self.shift);
        self.round += 1;
        Ok(())
    }
}

/// Prior `N(μ_meta, Σ_meta + γI)` conditioned on a recorded history.
///
/// `history` rows are item vectors `x_j` with rewards `y_j`.
pub fn init_user(meta: &MetaPrior, history: &[(Vector, f64)], noise_variance: f64) -> Result<UserPosterior> {
    check_noise(noise_variance)?;
    let mut precision = meta.prior_precision()?;
    let mut shift = &precision * &meta.mu_meta;
    let w = 1.0 / noise_variance;
    for (x, y) in history {
        if x.len() != meta.dim() {
            return Err(Error::Dimension(format!(
                "history vector of length {}, prior has dimension {}",
                x.len(),
                meta.dim()
            )));
        }
        if !y.is_finite() {
            return Err(Error::Data(format!("non-finite history reward {y}")));
        }
        precision.ger(w, x, x, 1.0);
        shift.axpy(w * y, x, 1.0);
    }
    UserPosterior::from_natural(precision, shift)
}

pub fn update_posterior(
    state: &mut UserPosterior,
    item_vector: &Vector,
    reward: f64,
    noise_variance: f64,
) -> Result<()> {
    check_noise(noise_variance)?;
    state.update(item_vector, reward, noise_variance)
}

/// `½ ln(1 + eᵀΣ_t e / σ²)`.
pub fn mutual_information(state: &UserPosterior, e: &Vector, noise_variance: f64) -> f64 {
    0.5 * (state.variance_along(e) / noise_variance).ln_1p()
}

/// Confidence width factor over the candidate set:
/// `4 √( λ_t / ln(1 + λ_t/σ²) · ln(2|A|/δ) )` with `λ_t = max_e eᵀΣ_t e`.
pub fn gamma_t<'a, I>(state: &UserPosterior, candidates: I, delta: f64, noise_variance: f64) -> Result<f64>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut count = 0usize;
    let mut lambda = 0.0f64;
    for e in candidates {
        count += 1;
        lambda = lambda.max(state.variance_along(e));
    }
    if count == 0 {
        return Err(Error::InsufficientCandidates {
            needed: 1,
            available: 0,
        });
    }
    Ok(gamma_from_lambda(lambda, count, delta, noise_variance))
}

/// The width factor for a known `λ_t` and candidate count.
pub fn gamma_from_lambda(lambda: f64, count: usize, delta: f64, noise_variance: f64) -> f64 {
    let ratio = lambda_ratio(lambda, noise_variance);
    4.0 * (ratio * (2.0 * count as f64 / delta).ln()).sqrt()
}

/// `λ / ln(1 + λ/σ²)`, continuous at `λ = 0` where it equals `σ²`.
pub(crate) fn lambda_ratio(lambda: f64, noise_variance: f64) -> f64 {
    let x = lambda / noise_variance;
    if x < 1e-12 {
        // λ/ln(1+x) = σ²·x/ln(1+x) = σ²(1 + x/2 + O(x²))
        noise_variance * (1.0 + 0.5 * x)
    } else {
        lambda / x.ln_1p()
    }
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if noise_variance > 0.0 && noise_variance.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "noise variance must be positive, got {noise_variance}"
        )))
    }
}
