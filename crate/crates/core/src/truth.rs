//! Truth inference baselines: majority vote and binary Dawid-Skene EM.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Result, RllError};

/// Probability clamp used by [`dawid_skene`] to keep every log finite.
pub const EM_CLAMP: f64 = 1e-6;

/// 1 if at least half the votes are 1.
pub fn majority_vote(crowd_labels: &[u8]) -> Result<u8> {
    if crowd_labels.is_empty() {
        return Err(RllError::InvalidArgument(
            "majority vote needs at least one label".into(),
        ));
    }
    let ones = crowd_labels.iter().filter(|&&y| y == 1).count();
    Ok(u8::from(2 * ones >= crowd_labels.len()))
}

/// Majority-vote labels for every example, in dataset order.
pub fn majority_labels(ds: &Dataset) -> Vec<u8> {
    ds.examples()
        .iter()
        .map(|ex| majority_vote(&ex.crowd_labels).expect("datasets have d >= 1"))
        .collect()
}

/// Per-slot confusion of a binary worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkerConfusion {
    /// P(label 1 | true 1)
    pub sensitivity: f64,
    /// P(label 0 | true 0)
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmResult {
    pub posterior_positive: IndexMap<String, f64>,
    pub confusions: Vec<WorkerConfusion>,
    pub class_prior: f64,
    /// Observed-data log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
}

impl EmResult {
    /// Hard labels at threshold 0.5 (ties to 1), in dataset order.
    pub fn hard_labels(&self) -> Vec<u8> {
        self.posterior_positive
            .values()
            .map(|&p| u8::from(p >= 0.5))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-9,
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EM_CLAMP, 1.0 - EM_CLAMP)
}

/// Binary Dawid-Skene EM.
///
/// Starts from majority-vote soft labels (fraction of positive votes), then
/// alternates an M-step (class prior and per-slot sensitivity/specificity
/// from the soft labels) with an E-step (posterior of the true label).
/// Stops when the log-likelihood gains less than `tol` or after `max_iters`
/// rounds. Sums run in example order, so results are bit-stable.
pub fn dawid_skene(ds: &Dataset, cfg: EmConfig) -> Result<EmResult> {
    if cfg.max_iters == 0 {
        return Err(RllError::InvalidArgument("max_iters must be >= 1".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(RllError::InvalidArgument("tol must be positive".into()));
    }
    let d = ds.worker_count();
    let labels: Vec<&[u8]> = ds.examples().iter().map(|ex| &ex.crowd_labels[..]).collect();

    let mut soft: Vec<f64> = labels
        .iter()
        .map(|y| y.iter().filter(|&&v| v == 1).count() as f64 / d as f64)
        .collect();
    let mut confusions = vec![
        WorkerConfusion {
            sensitivity: 1.0 - EM_CLAMP,
            specificity: 1.0 - EM_CLAMP,
        };
        d
    ];
    let mut prior = 0.5;
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;

        // M-step. A slot whose class has no posterior mass keeps its
        // previous estimate; it does not affect the likelihood.
        let mass_pos: f64 = soft.iter().sum();
        let mass_neg: f64 = soft.iter().map(|t| 1.0 - t).sum();
        prior = clamp_prob(mass_pos / soft.len() as f64);
        for (j, conf) in confusions.iter_mut().enumerate() {
            let mut agree_pos = 0.0;
            let mut agree_neg = 0.0;
            for (y, &t) in labels.iter().zip(&soft) {
                if y[j] == 1 {
                    agree_pos += t;
                } else {
                    agree_neg += 1.0 - t;
                }
            }
            if mass_pos > 0.0 {
                conf.sensitivity = clamp_prob(agree_pos / mass_pos);
            }
            if mass_neg > 0.0 {
                conf.specificity = clamp_prob(agree_neg / mass_neg);
            }
        }

        // E-step.
        let ll = e_step(&labels, &confusions, prior, &mut soft);
        let improved = trace.last().map_or(f64::INFINITY, |&prev| ll - prev);
        trace.push(ll);
        if improved < cfg.tol {
            break;
        }
    }

    Ok(EmResult {
        posterior_positive: ds.ids().map(str::to_string).zip(soft).collect(),
        confusions,
        class_prior: prior,
        log_likelihood_trace: trace,
        iterations,
    })
}

fn e_step(labels: &[&[u8]], confusions: &[WorkerConfusion], prior: f64, soft: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for (y, t) in labels.iter().zip(soft.iter_mut()) {
        let mut log_pos = prior.ln();
        let mut log_neg = (1.0 - prior).ln();
        for (&v, c) in y.iter().zip(confusions) {
            if v == 1 {
                log_pos += c.sensitivity.ln();
                log_neg += (1.0 - c.specificity).ln();
            } else {
                log_pos += (1.0 - c.sensitivity).ln();
                log_neg += c.specificity.ln();
            }
        }
        let m = log_pos.max(log_neg);
        let norm = m + ((log_pos - m).exp() + (log_neg - m).exp()).ln();
        *t = (log_pos - norm).exp();
        ll += norm;
    }
    ll
}
