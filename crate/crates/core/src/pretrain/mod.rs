//! Variational pretraining of Gaussian user/item embeddings through the
//! graph convolution, plus snapshot persistence.

mod loss;
mod params;
mod snapshot;
mod trainer;

pub use loss::{evaluate, loss_binary, loss_continuous, objective, Feedback, LossEval, LossSettings, Observation};
pub use params::{init_params, sample_embeddings, sigmoid, softplus, softplus_inv, VariationalParams};
pub use snapshot::{Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use trainer::{
    export_item_vectors, observations, pretrain, train, PretrainConfig, PretrainedModel, Provenance, TrainingReport,
    TrainingTarget,
};
