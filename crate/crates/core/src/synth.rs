//! Seeded synthetic crowdsourcing datasets.
//!
//! True labels are Bernoulli with `P(1) = ratio / (1 + ratio)`. Features are
//! spherical Gaussians centred at `±separation / 2` along the unit diagonal
//! (positives on the `+` side). Worker slot `j` reports the true label with
//! probability `worker_accuracies[j]`; when `worker_specificities` is given,
//! the accuracies act as sensitivities and the specificities apply to
//! negatives.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Example};
use crate::rng;
use crate::{Result, RllError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_examples: usize,
    pub feature_dim: usize,
    /// Positive-to-negative class ratio.
    pub class_ratio: f64,
    /// Distance between the two class means.
    pub class_separation: f64,
    /// Per-coordinate standard deviation around each class mean.
    pub noise_scale: f64,
    pub worker_accuracies: Vec<f64>,
    pub worker_specificities: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_examples: 400,
            feature_dim: 20,
            class_ratio: 1.8,
            class_separation: 3.0,
            noise_scale: 1.0,
            worker_accuracies: vec![0.9, 0.85, 0.7, 0.6, 0.55],
            worker_specificities: None,
            seed: 0,
        }
    }
}

fn in_worker_range(p: f64) -> bool {
    p > 0.5 && p <= 1.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RllError::InvalidArgument(msg));
        if self.n_examples == 0 {
            return fail("n_examples must be positive".into());
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive".into());
        }
        if !(self.class_ratio > 0.0 && self.class_ratio.is_finite()) {
            return fail(format!("class_ratio must be positive, got {}", self.class_ratio));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return fail(format!(
                "class_separation must be non-negative, got {}",
                self.class_separation
            ));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return fail(format!("noise_scale must be positive, got {}", self.noise_scale));
        }
        if self.worker_accuracies.is_empty() {
            return fail("need at least one worker".into());
        }
        if let Some(&a) = self.worker_accuracies.iter().find(|&&a| !in_worker_range(a)) {
            return fail(format!("worker accuracy {a} outside (0.5, 1]"));
        }
        if let Some(spec) = &self.worker_specificities {
            if spec.len() != self.worker_accuracies.len() {
                return fail(format!(
                    "{} specificities for {} workers",
                    spec.len(),
                    self.worker_accuracies.len()
                ));
            }
            if let Some(&s) = spec.iter().find(|&&s| !in_worker_range(s)) {
                return fail(format!("worker specificity {s} outside (0.5, 1]"));
            }
        }
        Ok(())
    }

    pub fn positive_share(&self) -> f64 {
        self.class_ratio / (1.0 + self.class_ratio)
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let share = cfg.positive_share();
    let offset = cfg.class_separation / 2.0 / (cfg.feature_dim as f64).sqrt();
    let width = cfg.n_examples.to_string().len();
    let specificities = cfg
        .worker_specificities
        .as_deref()
        .unwrap_or(&cfg.worker_accuracies);

    let examples = (0..cfg.n_examples)
        .map(|i| {
            let truth = u8::from(rng.random_bool(share));
            let centre = if truth == 1 { offset } else { -offset };
            let features = (0..cfg.feature_dim)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    centre + cfg.noise_scale * z
                })
                .collect();
            let crowd_labels = cfg
                .worker_accuracies
                .iter()
                .zip(specificities)
                .map(|(&sens, &spec)| {
                    let correct = rng.random_bool(if truth == 1 { sens } else { spec });
                    if correct {
                        truth
                    } else {
                        1 - truth
                    }
                })
                .collect();
            Example {
                id: format!("ex-{i:0width$}"),
                features,
                crowd_labels,
                expert_label: Some(truth),
            }
        })
        .collect();
    Dataset::new(examples)
}

/// Per worker slot, the fraction of crowd labels equal to the expert label.
pub fn empirical_worker_agreement(ds: &Dataset) -> Result<Vec<f64>> {
    let truth = ds.expert_labels()?;
    let mut agree = vec![0usize; ds.worker_count()];
    for (ex, &t) in ds.examples().iter().zip(&truth) {
        for (a, &y) in agree.iter_mut().zip(&ex.crowd_labels) {
            *a += usize::from(y == t);
        }
    }
    Ok(agree
        .into_iter()
        .map(|a| a as f64 / ds.len() as f64)
        .collect())
}
