use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetrize, Matrix, Vector};
use crate::pretrain::PretrainedModel;

/// Gaussian prior for new users, `N(μ_meta, Σ_meta + γI)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaPrior {
    pub mu_meta: Vector,
    pub sigma_meta: Matrix,
    pub gamma: f64,
}

/// Where a session's initial Gaussian comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Empirical mean/covariance of pretrained users, widened by `gamma`.
    Meta { gamma: f64 },
    /// `N(0, variance·I)`, ignoring pretrained users.
    Isotropic { variance: f64 },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Meta { gamma: 0.1 }
    }
}

impl MetaPrior {
    /// `N(0, variance·I)` expressed as a meta prior with `γ = 0`.
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!(
                "prior variance must be positive, got {variance}"
            )));
        }
        Ok(Self {
            mu_meta: Vector::zeros(dim),
            sigma_meta: Matrix::identity(dim, dim) * variance,
            gamma: 0.0,
        })
    }

    /// Mean and unbiased sample covariance of `vectors`.
    pub fn from_vectors<'a, I>(vectors: I, dim: usize, gamma: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("γ must be finite and ≥ 0, got {gamma}")));
        }
        let rows: Vec<Vector> = vectors
            .into_iter()
            .map(|v| {
                if v.len() == dim {
                    Ok(Vector::from_column_slice(v))
                } else {
                    Err(Error::Dimension(format!(
                        "user vector of length {}, expected {dim}",
                        v.len()
                    )))
                }
            })
            .collect::<Result<_>>()?;
        let m = rows.len();
        if m < 2 {
            return Err(Error::Data(format!(
                "meta prior needs at least 2 pretrained users, got {m}"
            )));
        }
        let mean = rows.iter().fold(Vector::zeros(dim), |acc, r| acc + r) / m as f64;
        let mut cov = Matrix::zeros(dim, dim);
        for r in &rows {
            let c = r - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= (m - 1) as f64;
        symmetrize(&mut cov);
        Ok(Self {
            mu_meta: mean,
            sigma_meta: cov,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_meta.len()
    }

    /// `Σ_meta + γI`.
    pub fn prior_covariance(&self) -> Matrix {
        let d = self.dim();
        &self.sigma_meta + Matrix::identity(d, d) * self.gamma
    }

    /// `(Σ_meta + γI)^{-1}`; fails when the widened covariance is singular.
    pub fn prior_precision(&self) -> Result<Matrix> {
        let chol = cholesky(&self.prior_covariance(), "Σ_meta + γI")?;
        let mut p = chol.inverse();
        symmetrize(&mut p);
        Ok(p)
    }
}

/// Meta prior over all pretrained users' final embeddings `Φ*·g_u`.
pub fn build_meta_prior(model: &PretrainedModel, gamma: f64) -> Result<MetaPrior> {
    MetaPrior::from_vectors((0..model.num_users).map(|u| model.user_vector(u)), model.dim(), gamma)
}

/// Resolves a [`PriorSpec`] against a trained model.
pub fn resolve_prior(spec: &PriorSpec, model: &PretrainedModel) -> Result<MetaPrior> {
    match *spec {
        PriorSpec::Meta { gamma } => build_meta_prior(model, gamma),
        PriorSpec::Isotropic { variance } => MetaPrior::isotropic(model.dim(), variance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_sample_covariance() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let p = MetaPrior::from_vectors([&a[..], &b[..]], 2, 0.0).unwrap();
        assert_eq!(p.mu_meta, Vector::from_vec(vec![0.5, 0.5]));
        assert_eq!(p.sigma_meta, Matrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        // Rank one: singular without widening.
        assert!(p.prior_precision().is_err());
    }

    #[test]
    fn identical_users_need_widening() {
        let v = [0.3, -1.0, 2.0];
        let p = MetaPrior::from_vectors([&v[..], &v[..], &v[..]], 3, 0.0).unwrap();
        assert_eq!(p.sigma_meta, Matrix::zeros(3, 3));
        assert!(p.prior_precision().is_err());
        let p = MetaPrior { gamma: 0.1, ..p };
        let prec = p.prior_precision().unwrap();
        assert!((prec - Matrix::identity(3, 3) * 10.0).amax() < 1e-12);
    }

    #[test]
    fn too_few_users_rejected() {
        let v = [1.0];
        assert!(MetaPrior::from_vectors([&v[..]], 1, 0.1).is_err());
        assert!(MetaPrior::from_vectors([&v[..], &v[..]], 2, 0.1).is_err());
        assert!(MetaPrior::from_vectors([&v[..], &v[..]], 1, -1.0).is_err());
    }
}
