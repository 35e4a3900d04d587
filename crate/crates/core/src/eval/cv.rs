//! Stratified k-fold comparison of the embedding variants and baselines.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::{
    confidence_profile, prior_from_class_ratio, ConfidenceMode, DEFAULT_PRIOR_STRENGTH,
};
use crate::data::{stratified_folds, Dataset, FoldAssignment};
use crate::encoder::{self, EncoderConfig, DEFAULT_HIDDEN};
use crate::grouping::{partition_by_label, GroupingConfig};
use crate::rng::derive_seed;
use crate::truth::{dawid_skene, majority_labels, majority_vote, EmConfig};
use crate::{Result, RllError};

use super::logreg::{train_logreg, LogRegConfig};
use super::metrics::{accuracy, f1};
use super::report::{ConfigEcho, FoldMetrics, MetricsReport, SweepTag};

/// What is learned on the training folds and how held-out examples are
/// labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Logistic regression on raw features, majority-vote labels.
    Raw,
    /// Majority vote of the held-out example's own crowd labels.
    Mv,
    /// Logistic regression on raw features, Dawid-Skene EM labels.
    Em,
    /// Embeddings trained with unit confidences.
    Rll,
    /// Embeddings trained with maximum-likelihood confidences.
    RllMle,
    /// Embeddings trained with Beta-posterior confidences.
    RllBayes,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Raw,
        Method::Mv,
        Method::Em,
        Method::Rll,
        Method::RllMle,
        Method::RllBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Mv => "mv",
            Method::Em => "em",
            Method::Rll => "rll",
            Method::RllMle => "rll-mle",
            Method::RllBayes => "rll-bayes",
        }
    }

    pub fn confidence_mode(self) -> Option<ConfidenceMode> {
        match self {
            Method::Rll => Some(ConfidenceMode::Off),
            Method::RllMle => Some(ConfidenceMode::Mle),
            Method::RllBayes => Some(ConfidenceMode::Bayesian),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = RllError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                RllError::InvalidArgument(format!(
                    "unknown method {s:?} (expected one of raw, mv, em, rll, rll-mle, rll-bayes)"
                ))
            })
    }
}

/// Everything a cross-validation run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    /// Root seed for fold assignment, group sampling and initialization.
    pub seed: u64,
    /// Negatives per group.
    pub k: usize,
    /// Defaults to 50 × |D⁺| of each training fold.
    pub groups_per_epoch: Option<usize>,
    /// Encoder widths after the input layer; the last is the embedding size.
    pub hidden: Vec<usize>,
    pub eta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub prior_strength: f64,
    /// Positive:negative ratio for the Beta prior. Estimated from the
    /// training fold's majority-vote labels when absent.
    pub class_ratio: Option<f64>,
    pub logreg: LogRegConfig,
    pub em: EmConfig,
    /// Folds evaluated concurrently; results never depend on it.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            k: 3,
            groups_per_epoch: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            eta: 1.0,
            learning_rate: 0.05,
            epochs: 100,
            init_scale: 1.0,
            prior_strength: DEFAULT_PRIOR_STRENGTH,
            class_ratio: None,
            logreg: LogRegConfig::default(),
            em: EmConfig::default(),
            threads: 1,
        }
    }
}

impl EvalConfig {
    fn encoder_config(&self, feature_dim: usize, fold: usize) -> EncoderConfig {
        let mut layer_sizes = vec![feature_dim];
        layer_sizes.extend(&self.hidden);
        EncoderConfig {
            layer_sizes,
            eta: self.eta,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: derive_seed(self.seed, 200 + fold as u64),
            init_scale: self.init_scale,
        }
    }

    fn echo(&self, ds: &Dataset) -> ConfigEcho {
        ConfigEcho {
            k: self.k,
            d: ds.worker_count(),
            eta: self.eta,
            seed: self.seed,
            folds: self.folds,
        }
    }
}

/// Runs stratified cross-validation of `method` on `ds`.
pub fn cross_validate(ds: &Dataset, method: Method, cfg: &EvalConfig) -> Result<MetricsReport> {
    let folds = stratified_folds(ds, cfg.folds, cfg.seed)?;
    cross_validate_with_folds(ds, &folds, method, cfg)
}

/// Cross-validation over a given fold assignment.
///
/// Training-side computations only ever see expert-free copies of the
/// data; expert labels of the held-out fold are read after prediction.
pub fn cross_validate_with_folds(
    ds: &Dataset,
    folds: &FoldAssignment,
    method: Method,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    if folds.as_map().len() != ds.len() || ds.ids().any(|id| folds.fold_of(id).is_none()) {
        return Err(RllError::InvalidArgument(
            "fold assignment does not cover the dataset".into(),
        ));
    }
    let run = |f: usize| run_fold(ds, folds, f, method, cfg);
    let results: Vec<Result<FoldMetrics>> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RllError::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..folds.folds()).into_par_iter().map(run).collect())
    } else {
        (0..folds.folds()).map(run).collect()
    };
    let fold_metrics = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_folds(method, cfg.echo(ds), None, fold_metrics))
}

fn run_fold(
    ds: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    method: Method,
    cfg: &EvalConfig,
) -> Result<FoldMetrics> {
    let degenerate = |reason: String| RllError::DegenerateFold { fold, reason };
    let train_idx = folds.train_indices(fold);
    let test_idx = folds.test_indices(fold);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(degenerate("empty train or test split".into()));
    }
    let train = ds.subset(&train_idx)?.without_expert_labels();
    let test = ds.subset(&test_idx)?.without_expert_labels();

    let predicted = predict_fold(&train, &test, fold, method, cfg).map_err(|e| match e {
        RllError::InvalidArgument(reason) => degenerate(reason),
        other => other,
    })?;

    let truth: IndexMap<String, u8> = test_idx
        .iter()
        .map(|&i| {
            let ex = ds.get(i);
            ex.expert_label
                .map(|y| (ex.id.clone(), y))
                .ok_or_else(|| RllError::MissingExpertLabel(ex.id.clone()))
        })
        .collect::<Result<_>>()?;
    Ok(FoldMetrics {
        fold,
        test_size: test_idx.len(),
        accuracy: accuracy(&predicted, &truth)?,
        f1: f1(&predicted, &truth)?,
    })
}

/// Fits `method` on `train` and labels every example of `test`. Neither
/// dataset carries expert labels.
fn predict_fold(
    train: &Dataset,
    test: &Dataset,
    fold: usize,
    method: Method,
    cfg: &EvalConfig,
) -> Result<IndexMap<String, u8>> {
    debug_assert!(train.examples().iter().all(|ex| ex.expert_label.is_none()));
    debug_assert!(test.examples().iter().all(|ex| ex.expert_label.is_none()));

    let raw = |ds: &Dataset| -> Vec<Vec<f64>> {
        ds.examples().iter().map(|ex| ex.features.clone()).collect()
    };
    let (train_x, test_x, train_y) = match method {
        Method::Mv => {
            return test
                .examples()
                .iter()
                .map(|ex| Ok((ex.id.clone(), majority_vote(&ex.crowd_labels)?)))
                .collect();
        }
        Method::Raw => (raw(train), raw(test), majority_labels(train)),
        Method::Em => {
            let em = dawid_skene(train, cfg.em)?;
            (raw(train), raw(test), em.hard_labels())
        }
        Method::Rll | Method::RllMle | Method::RllBayes => {
            let mode = method.confidence_mode().expect("embedding method");
            let mv = majority_labels(train);
            let prior = match mode {
                ConfidenceMode::Bayesian => {
                    let ratio = match cfg.class_ratio {
                        Some(r) => r,
                        None => {
                            let pos = mv.iter().filter(|&&y| y == 1).count();
                            let neg = mv.len() - pos;
                            if pos == 0 || neg == 0 {
                                return Err(RllError::InvalidArgument(
                                    "training labels contain a single class".into(),
                                ));
                            }
                            pos as f64 / neg as f64
                        }
                    };
                    Some(prior_from_class_ratio(ratio, cfg.prior_strength)?)
                }
                _ => None,
            };
            let profile = confidence_profile(train, mode, prior)?;
            let pools = partition_by_label(train, &profile)?;
            let grouping = GroupingConfig {
                k: cfg.k,
                groups_per_epoch: cfg
                    .groups_per_epoch
                    .unwrap_or_else(|| GroupingConfig::default_groups_per_epoch(pools.positives.len())),
                seed: derive_seed(cfg.seed, 100 + fold as u64),
            };
            let enc_cfg = cfg.encoder_config(train.feature_dim(), fold);
            let outcome = encoder::train(train, &profile, &grouping, &enc_cfg)?;
            let embed = |ds: &Dataset| -> Result<Vec<Vec<f64>>> {
                Ok(encoder::embed_dataset(&outcome.params, ds)?
                    .into_values()
                    .map(|e| e.0)
                    .collect())
            };
            (embed(train)?, embed(test)?, mv)
        }
    };

    let refs: Vec<&[f64]> = train_x.iter().map(|v| &v[..]).collect();
    let model = train_logreg(&refs, &train_y, &cfg.logreg)?;
    test.examples()
        .iter()
        .zip(&test_x)
        .map(|(ex, x)| Ok((ex.id.clone(), model.predict_label(x)?)))
        .collect()
}

/// Cross-validates once per negative count in `ks`, ascending. A value that
/// fails (for example `k` larger than some fold's negative pool) yields a
/// report carrying the error; the other values are unaffected.
pub fn sweep_k(ds: &Dataset, ks: &[usize], method: Method, base: &EvalConfig) -> Vec<MetricsReport> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .map(|k| {
            let cfg = EvalConfig { k, ..base.clone() };
            let tag = SweepTag { name: "k".into(), value: k };
            match cross_validate(ds, method, &cfg) {
                Ok(report) => report.tagged(tag),
                Err(e) => MetricsReport::failed(method, cfg.echo(ds), Some(tag), e.to_string()),
            }
        })
        .collect()
}

/// Cross-validates once per worker count in `worker_counts`, ascending,
/// keeping the first `d'` crowd-label slots of every example.
pub fn sweep_d(
    ds: &Dataset,
    worker_counts: &[usize],
    method: Method,
    base: &EvalConfig,
) -> Result<Vec<MetricsReport>> {
    let mut values = worker_counts.to_vec();
    values.sort_unstable();
    values.dedup();
    if let Some(&bad) = values.iter().find(|&&d| d == 0 || d > ds.worker_count()) {
        return Err(RllError::InvalidArgument(format!(
            "cannot keep {bad} worker slots of {}",
            ds.worker_count()
        )));
    }
    values
        .into_iter()
        .map(|d| {
            let truncated = ds.truncate_workers(d)?;
            let tag = SweepTag { name: "d".into(), value: d };
            Ok(match cross_validate(&truncated, method, base) {
                Ok(report) => report.tagged(tag),
                Err(e) => MetricsReport::failed(method, base.echo(&truncated), Some(tag), e.to_string()),
            })
        })
        .collect()
}
