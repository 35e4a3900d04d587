//! Training groups: one anchor positive, one target positive and `k`
//! negatives, sampled from the label-induced positive and negative pools.
//!
//! Pools and groups refer to examples by their index in the dataset the
//! pools were built from.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceProfile;
use crate::data::Dataset;
use crate::rng;
use crate::{Result, RllError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Group {
    pub anchor: usize,
    pub target: usize,
    pub negatives: Vec<usize>,
}

impl Group {
    /// Target followed by the negatives: the softmax candidate set.
    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.target).chain(self.negatives.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingConfig {
    /// Negatives per group.
    pub k: usize,
    pub groups_per_epoch: usize,
    pub seed: u64,
}

impl GroupingConfig {
    /// Groups per epoch used when none is configured.
    pub fn default_groups_per_epoch(positives: usize) -> usize {
        50 * positives
    }
}

/// Positive (D⁺) and negative (D⁻) pools of dataset indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelPools {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Splits `ds` by each example's assigned label in `profile`.
pub fn partition_by_label(ds: &Dataset, profile: &ConfidenceProfile) -> Result<LabelPools> {
    let mut pools = LabelPools::default();
    for (i, score) in profile.aligned(ds)?.iter().enumerate() {
        if score.assigned_label == 1 {
            pools.positives.push(i);
        } else {
            pools.negatives.push(i);
        }
    }
    Ok(pools)
}

fn check_pools(positives: usize, negatives: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(RllError::InvalidArgument("k must be >= 1".into()));
    }
    if positives < 2 {
        return Err(RllError::NotEnoughPositives(positives));
    }
    if negatives < k {
        return Err(RllError::NotEnoughNegatives {
            k,
            available: negatives,
        });
    }
    Ok(())
}

/// Samples `cfg.groups_per_epoch` independent groups: anchor uniform over
/// the positives, target uniform over the other positives, negatives a
/// uniform `k`-subset of the negative pool.
pub fn generate_groups(pools: &LabelPools, cfg: &GroupingConfig) -> Result<Vec<Group>> {
    let mut rng = rng::seeded(cfg.seed);
    sample_groups(pools, cfg.k, cfg.groups_per_epoch, &mut rng)
}

pub(crate) fn sample_groups(
    pools: &LabelPools,
    k: usize,
    count: usize,
    rng: &mut rng::Rng,
) -> Result<Vec<Group>> {
    let (pos, neg) = (&pools.positives, &pools.negatives);
    check_pools(pos.len(), neg.len(), k)?;
    if count == 0 {
        return Err(RllError::InvalidArgument("groups_per_epoch must be >= 1".into()));
    }
    let groups = (0..count)
        .map(|_| {
            let a = rng.random_range(0..pos.len());
            let mut t = rng.random_range(0..pos.len() - 1);
            if t >= a {
                t += 1;
            }
            let negatives = index::sample(rng, neg.len(), k)
                .into_iter()
                .map(|j| neg[j])
                .collect();
            Group {
                anchor: pos[a],
                target: pos[t],
                negatives,
            }
        })
        .collect();
    Ok(groups)
}

/// Number of distinct groups under this sampling design: ordered positive
/// pairs times unordered negative subsets, `p (p - 1) C(m, k)`. Saturates
/// at `u128::MAX`.
pub fn max_group_count(positives: usize, negatives: usize, k: usize) -> Result<u128> {
    check_pools(positives, negatives, k)?;
    let pairs = positives as u128 * (positives as u128 - 1);
    Ok(pairs.saturating_mul(binomial(negatives as u128, k as u128)))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        match acc.checked_mul(n - i) {
            Some(v) => acc = v / (i + 1),
            None => return u128::MAX,
        }
    }
    acc
}
