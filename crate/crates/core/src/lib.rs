//! Representation learning from limited, inconsistent crowdsourced labels.
//!
//! The pipeline has four stages:
//!
//! 1. [`confidence`] turns each example's crowd votes into a label and a
//!    confidence (maximum likelihood or Beta-posterior estimate).
//! 2. [`grouping`] re-assembles the labelled pool into many training groups
//!    of one anchor positive, one target positive and `k` negatives.
//! 3. [`encoder`] trains a small fully-connected network so that, within a
//!    group, the target is retrieved from the anchor through a
//!    confidence-weighted softmax over cosine relevances.
//! 4. [`eval`] fits logistic regression on the learned embeddings and runs
//!    stratified cross-validation against expert labels.
//!
//! [`truth`] holds the classical label-aggregation baselines (majority vote
//! and Dawid-Skene EM) and [`synth`] generates seeded synthetic crowdsourcing
//! datasets so every experiment runs without external data.

pub mod confidence;
pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod grouping;
pub mod rng;
pub mod synth;
pub mod truth;

pub use error::{Result, RllError};
