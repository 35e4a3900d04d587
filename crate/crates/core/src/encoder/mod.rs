//! Fully-connected encoder and its group-softmax training objective.
//!
//! Hidden layers use `tanh`, the output layer is linear. Relevance between
//! two examples is the cosine of their embeddings; within a group the
//! anchor retrieves the target among `k + 1` candidates through a softmax
//! over `η · δ · cosine`, where `δ` is each candidate's label confidence.

mod checkpoint;
mod network;
mod objective;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use network::{cosine_relevance, embed_dataset, forward, DenseLayer, Embedding, EncoderParams};
pub use objective::{
    batch_loss, finite_difference_check, gradient, group_posterior, loss_and_gradient,
    unweighted_group_posterior, ObjectiveInputs,
};
pub use train::{initialize, train, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::{Result, RllError};

/// Hidden widths used when none are configured.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 32, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Input width first, embedding width last.
    pub layer_sizes: Vec<usize>,
    /// Softmax smoothing factor.
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Initial weights are uniform in `±init_scale / sqrt(fan_in)`.
    pub init_scale: f64,
}

impl EncoderConfig {
    /// Default architecture `[feature_dim, 64, 32, 16]` and optimizer.
    pub fn with_feature_dim(feature_dim: usize) -> Self {
        let mut layer_sizes = vec![feature_dim];
        layer_sizes.extend(DEFAULT_HIDDEN);
        Self {
            layer_sizes,
            eta: 1.0,
            learning_rate: 0.05,
            epochs: 100,
            seed: 0,
            init_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(RllError::InvalidArgument(
                "encoder needs at least an input and an output layer".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(RllError::InvalidArgument("layer sizes must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(RllError::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(RllError::InvalidArgument(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(RllError::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(RllError::InvalidArgument(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}
