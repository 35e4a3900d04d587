use rand::Rng;
use serde::Serialize;

use crate::confidence::ConfidenceProfile;
use crate::data::Dataset;
use crate::grouping::{partition_by_label, sample_groups, GroupingConfig};
use crate::rng::{self, derive_seed};
use crate::{Result, RllError};

use super::objective::{EmbeddingCache, ObjectiveInputs};
use super::{EncoderConfig, EncoderParams};

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean per-group loss on a fixed monitor set (the first epoch's
    /// groups), before each epoch's step and once after the last one.
    pub loss_trace: Vec<f64>,
}

/// Weights uniform in `±init_scale / sqrt(fan_in)`, biases zero.
pub fn initialize(cfg: &EncoderConfig) -> Result<EncoderParams> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let mut params = EncoderParams::zeros(&cfg.layer_sizes);
    for layer in &mut params.layers {
        let bound = cfg.init_scale / (layer.inputs as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

/// Full-batch gradient descent on freshly sampled groups every epoch.
///
/// Each step moves the parameters by `learning_rate` times the mean
/// per-group gradient. Group sampling for epoch `e` is seeded from
/// `grouping.seed` and `e`, so runs are reproducible.
pub fn train(
    ds: &Dataset,
    profile: &ConfidenceProfile,
    grouping: &GroupingConfig,
    cfg: &EncoderConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.layer_sizes[0] != ds.feature_dim() {
        return Err(RllError::DimensionMismatch {
            expected: cfg.layer_sizes[0],
            found: ds.feature_dim(),
        });
    }
    let pools = partition_by_label(ds, profile)?;
    let inputs = ObjectiveInputs::new(ds, profile)?;
    let mut params = initialize(cfg)?;

    let epoch_groups = |epoch: usize| {
        let mut rng = rng::seeded(derive_seed(grouping.seed, epoch as u64));
        sample_groups(&pools, grouping.k, grouping.groups_per_epoch, &mut rng)
    };
    let monitor = epoch_groups(0)?;
    let scale = 1.0 / grouping.groups_per_epoch as f64;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..cfg.epochs {
        let groups = if epoch == 0 {
            monitor.clone()
        } else {
            epoch_groups(epoch)?
        };
        let cache = EmbeddingCache::build(&params, &inputs, monitor.iter().chain(&groups))?;
        let (loss, grad) = cache.loss_and_gradient(&params, &groups, &inputs, cfg.eta);
        let monitored = cache.loss(&monitor, &inputs, cfg.eta);
        if !loss.is_finite() || !monitored.is_finite() {
            return Err(RllError::Diverged { epoch, loss });
        }
        trace.push(monitored * scale);
        params.add_scaled(&grad, -cfg.learning_rate * scale);
        if !params.is_finite() {
            return Err(RllError::Diverged { epoch, loss });
        }
    }

    let cache = EmbeddingCache::build(&params, &inputs, &monitor)?;
    let final_loss = cache.loss(&monitor, &inputs, cfg.eta);
    if !final_loss.is_finite() {
        return Err(RllError::Diverged {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    trace.push(final_loss * scale);

    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}
