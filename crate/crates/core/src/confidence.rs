//! Per-example label confidence from crowd votes.
//!
//! With `s` positive votes out of `d`, the maximum-likelihood estimate of the
//! probability that the true label is 1 is `s / d`. Placing a `Beta(α, β)`
//! prior on that probability gives the posterior mean `(α + s) / (α + β + d)`,
//! which stays away from 0 and 1 when `d` is small.
//!
//! The confidence attached to an example is the probability of its
//! *assigned* label, `max(p, 1 - p)`, so negatives and positives are treated
//! symmetrically.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::truth::majority_vote;
use crate::{Result, RllError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    alpha: f64,
    beta: f64,
}

impl BetaPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(RllError::InvalidArgument(format!(
                "Beta prior needs alpha, beta > 0 (got {alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Default pseudo-count mass of the class-ratio prior.
pub const DEFAULT_PRIOR_STRENGTH: f64 = 2.0;

/// Estimated label and its confidence for one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceScore {
    /// Estimated probability that the true label is 1.
    pub positive_posterior: f64,
    pub assigned_label: u8,
    /// Probability of `assigned_label`: `max(p, 1 - p)`.
    pub assigned_confidence: f64,
}

impl ConfidenceScore {
    /// Label 1 iff `p >= 0.5`.
    pub fn from_posterior(positive_posterior: f64) -> Self {
        let assigned_label = u8::from(positive_posterior >= 0.5);
        Self {
            positive_posterior,
            assigned_label,
            assigned_confidence: positive_posterior.max(1.0 - positive_posterior),
        }
    }
}

fn count_ones(labels: &[u8]) -> Result<usize> {
    labels.iter().try_fold(0usize, |acc, &y| match y {
        0 => Ok(acc),
        1 => Ok(acc + 1),
        other => Err(RllError::InvalidArgument(format!(
            "crowd label {other} outside {{0,1}}"
        ))),
    })
}

/// Fraction of positive votes.
pub fn mle_confidence(crowd_labels: &[u8]) -> Result<f64> {
    if crowd_labels.is_empty() {
        return Err(RllError::InvalidArgument(
            "MLE confidence needs at least one label".into(),
        ));
    }
    let ones = count_ones(crowd_labels)?;
    Ok(ones as f64 / crowd_labels.len() as f64)
}

/// Beta-posterior mean of the positive-label probability. An empty label
/// sequence returns the prior mean.
pub fn bayesian_confidence(crowd_labels: &[u8], prior: BetaPrior) -> Result<f64> {
    let ones = count_ones(crowd_labels)?;
    Ok((prior.alpha + ones as f64) / (prior.alpha + prior.beta + crowd_labels.len() as f64))
}

/// Prior whose mean equals the positive-class share `ratio / (1 + ratio)`
/// and whose pseudo-count mass `α + β` equals `strength`.
pub fn prior_from_class_ratio(positive_to_negative_ratio: f64, strength: f64) -> Result<BetaPrior> {
    let ratio = positive_to_negative_ratio;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(RllError::InvalidArgument(format!(
            "class ratio must be positive, got {ratio}"
        )));
    }
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(RllError::InvalidArgument(format!(
            "prior strength must be positive, got {strength}"
        )));
    }
    let share = ratio / (1.0 + ratio);
    BetaPrior::new(strength * share, strength / (1.0 + ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceMode {
    /// Majority-vote labels, every confidence 1.
    Off,
    Mle,
    Bayesian,
}

/// Confidence scores keyed by example id, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceProfile {
    scores: IndexMap<String, ConfidenceScore>,
}

impl ConfidenceProfile {
    pub fn from_scores(scores: IndexMap<String, ConfidenceScore>) -> Self {
        Self { scores }
    }

    pub fn get(&self, id: &str) -> Option<&ConfidenceScore> {
        self.scores.get(id)
    }

    /// Score of the `index`-th entry.
    pub fn by_index(&self, index: usize) -> &ConfidenceScore {
        &self.scores[index]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ConfidenceScore)> {
        self.scores.iter().map(|(id, s)| (id.as_str(), s))
    }

    /// Scores in the order of `ds`, failing when an example has no entry.
    pub fn aligned(&self, ds: &Dataset) -> Result<Vec<ConfidenceScore>> {
        ds.ids()
            .map(|id| {
                self.scores.get(id).copied().ok_or_else(|| {
                    RllError::InvalidArgument(format!("missing profile entry for {id}"))
                })
            })
            .collect()
    }
}

/// Scores every example of `ds` under `mode`. `prior` is required for
/// [`ConfidenceMode::Bayesian`] and ignored otherwise.
pub fn confidence_profile(
    ds: &Dataset,
    mode: ConfidenceMode,
    prior: Option<BetaPrior>,
) -> Result<ConfidenceProfile> {
    if mode == ConfidenceMode::Bayesian && prior.is_none() {
        return Err(RllError::InvalidArgument(
            "bayesian confidence needs a Beta prior".into(),
        ));
    }
    let mut scores = IndexMap::with_capacity(ds.len());
    for ex in ds.examples() {
        let labels = &ex.crowd_labels;
        let score = match (mode, prior) {
            (ConfidenceMode::Off, _) => ConfidenceScore {
                positive_posterior: mle_confidence(labels)?,
                assigned_label: majority_vote(labels)?,
                assigned_confidence: 1.0,
            },
            (ConfidenceMode::Mle, _) => ConfidenceScore::from_posterior(mle_confidence(labels)?),
            (ConfidenceMode::Bayesian, Some(prior)) => {
                ConfidenceScore::from_posterior(bayesian_confidence(labels, prior)?)
            }
            (ConfidenceMode::Bayesian, None) => unreachable!(),
        };
        scores.insert(ex.id.clone(), score);
    }
    Ok(ConfidenceProfile { scores })
}
