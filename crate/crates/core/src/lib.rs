//! Interactive graph-convolutional collaborative filtering.
//!
//! The pipeline has two phases. [`pretrain`] fits diagonal-Gaussian
//! variational posteriors over user and item embeddings through a linear
//! graph convolution ([`graph`]). [`online`] turns the pretrained user means
//! into a meta prior and serves each user with a conjugate Bayesian linear
//! UCB loop over the fixed item vectors. [`baselines`], [`eval`] and
//! [`regret_lab`] provide comparison policies, offline replay evaluation and
//! a synthetic bandit laboratory.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod online;
pub mod policy;
pub mod pretrain;
pub mod regret_lab;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
