//! Confidence-weighted group softmax, its negative log-likelihood and the
//! analytic gradient.
//!
//! The loss depends on the parameters only through the embeddings of the
//! examples that appear in some group. The gradient is therefore computed in
//! two passes: accumulate `dL/d(embedding)` over all groups, then
//! back-propagate once per distinct example.

use crate::confidence::ConfidenceProfile;
use crate::data::Dataset;
use crate::grouping::Group;
use crate::{Result, RllError};

use super::network::{backprop_into, dot, forward_trace, norm};
use super::EncoderParams;

/// Feature vectors and candidate confidences indexed like the dataset the
/// groups were drawn from.
#[derive(Debug, Clone)]
pub struct ObjectiveInputs<'a> {
    features: Vec<&'a [f64]>,
    confidences: Vec<f64>,
}

impl<'a> ObjectiveInputs<'a> {
    /// Uses each example's assigned-label confidence from `profile`.
    pub fn new(ds: &'a Dataset, profile: &ConfidenceProfile) -> Result<Self> {
        let confidences = profile
            .aligned(ds)?
            .iter()
            .map(|s| s.assigned_confidence)
            .collect();
        Ok(Self {
            features: ds.examples().iter().map(|ex| &ex.features[..]).collect(),
            confidences,
        })
    }

    pub fn from_parts(features: Vec<&'a [f64]>, confidences: Vec<f64>) -> Result<Self> {
        if features.len() != confidences.len() {
            return Err(RllError::DimensionMismatch {
                expected: features.len(),
                found: confidences.len(),
            });
        }
        Ok(Self {
            features,
            confidences,
        })
    }

    /// Same features with every confidence set to 1.
    pub fn unweighted(&self) -> Self {
        Self {
            features: self.features.clone(),
            confidences: vec![1.0; self.features.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn check_group(&self, g: &Group) -> Result<()> {
        match std::iter::once(g.anchor).chain(g.candidates()).find(|&i| i >= self.len()) {
            Some(i) => Err(RllError::InvalidArgument(format!(
                "group refers to example {i} outside {} inputs",
                self.len()
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Default)]
struct Scratch {
    rel: Vec<f64>,
    prob: Vec<f64>,
}

/// Forward activations and unit embeddings of the examples a set of groups
/// touches.
pub(crate) struct EmbeddingCache {
    acts: Vec<Option<Vec<Vec<f64>>>>,
    unit: Vec<Vec<f64>>,
    norm: Vec<f64>,
}

impl EmbeddingCache {
    pub(crate) fn build<'g>(
        params: &EncoderParams,
        inputs: &ObjectiveInputs,
        groups: impl IntoIterator<Item = &'g Group>,
    ) -> Result<Self> {
        let n = inputs.len();
        let mut needed = vec![false; n];
        for g in groups {
            inputs.check_group(g)?;
            needed[g.anchor] = true;
            for c in g.candidates() {
                needed[c] = true;
            }
        }
        let mut acts = vec![None; n];
        let mut unit = vec![Vec::new(); n];
        let mut norms = vec![0.0; n];
        for i in (0..n).filter(|&i| needed[i]) {
            let trace = forward_trace(params, inputs.features[i])?;
            let out = trace.last().expect("at least one layer");
            let nrm = norm(out);
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(RllError::DegenerateEmbedding);
            }
            unit[i] = out.iter().map(|v| v / nrm).collect();
            norms[i] = nrm;
            acts[i] = Some(trace);
        }
        Ok(Self {
            acts,
            unit,
            norm: norms,
        })
    }

    fn relevance(&self, a: usize, b: usize) -> f64 {
        dot(&self.unit[a], &self.unit[b]).clamp(-1.0, 1.0)
    }

    /// Fills `logits` with `η · δ · r(anchor, c)` for each candidate `c`
    /// (target first) and returns the log-sum-exp.
    fn logits(&self, g: &Group, conf: &[f64], eta: f64, logits: &mut Vec<f64>) -> f64 {
        logits.clear();
        logits.extend(g.candidates().map(|c| eta * conf[c] * self.relevance(g.anchor, c)));
        log_sum_exp(logits)
    }

    /// Candidate relevances (target first) and softmax probabilities of one
    /// group; returns the group's negative log-likelihood.
    fn softmax(&self, g: &Group, conf: &[f64], eta: f64, s: &mut Scratch) -> f64 {
        s.rel.clear();
        s.prob.clear();
        for c in g.candidates() {
            let r = self.relevance(g.anchor, c);
            s.rel.push(r);
            s.prob.push(eta * conf[c] * r);
        }
        let z0 = s.prob[0];
        let m = s.prob.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in &mut s.prob {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in &mut s.prob {
            *v /= sum;
        }
        m + sum.ln() - z0
    }

    pub(crate) fn loss(&self, groups: &[Group], inputs: &ObjectiveInputs, eta: f64) -> f64 {
        let mut s = Scratch::default();
        groups
            .iter()
            .map(|g| self.softmax(g, &inputs.confidences, eta, &mut s))
            .sum()
    }

    pub(crate) fn loss_and_gradient(
        &self,
        params: &EncoderParams,
        groups: &[Group],
        inputs: &ObjectiveInputs,
        eta: f64,
    ) -> (f64, EncoderParams) {
        let dim = params.output_dim();
        let mut emb_grad: Vec<Vec<f64>> = self
            .acts
            .iter()
            .map(|a| if a.is_some() { vec![0.0; dim] } else { Vec::new() })
            .collect();
        let mut s = Scratch::default();
        let mut loss = 0.0;

        for g in groups {
            loss += self.softmax(g, &inputs.confidences, eta, &mut s);
            let a = g.anchor;
            for (m, c) in g.candidates().enumerate() {
                let p = s.prob[m];
                let dz = if m == 0 { p - 1.0 } else { p };
                let coef = dz * eta * inputs.confidences[c];
                if coef == 0.0 {
                    continue;
                }
                let r = s.rel[m];
                // d cos(a, c) / da = (û_c - r û_a) / |a|
                let (ca, cc) = (coef / self.norm[a], coef / self.norm[c]);
                for t in 0..dim {
                    let (ua, uc) = (self.unit[a][t], self.unit[c][t]);
                    emb_grad[a][t] += ca * (uc - r * ua);
                    emb_grad[c][t] += cc * (ua - r * uc);
                }
            }
        }

        let mut grads = EncoderParams::zeros(&params.layer_sizes());
        for (acts, g) in self.acts.iter().zip(&emb_grad) {
            if let Some(acts) = acts {
                backprop_into(params, acts, g, &mut grads);
            }
        }
        (loss, grads)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(RllError::InvalidArgument(format!("eta must be positive, got {eta}")))
    }
}

/// Confidence-weighted probability of retrieving the group's target from
/// its anchor among the `k + 1` candidates.
pub fn group_posterior(
    params: &EncoderParams,
    group: &Group,
    inputs: &ObjectiveInputs,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    let cache = EmbeddingCache::build(params, inputs, [group])?;
    let mut logits = Vec::new();
    let lse = cache.logits(group, &inputs.confidences, eta, &mut logits);
    Ok((logits[0] - lse).exp())
}

/// Plain softmax `exp(η r_target) / Σ exp(η r_c)`, ignoring confidences.
pub fn unweighted_group_posterior(
    params: &EncoderParams,
    group: &Group,
    inputs: &ObjectiveInputs,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    let cache = EmbeddingCache::build(params, inputs, [group])?;
    let logits: Vec<f64> = group
        .candidates()
        .map(|c| eta * cache.relevance(group.anchor, c))
        .collect();
    Ok((logits[0] - log_sum_exp(&logits)).exp())
}

/// `-Σ log p̂(target | anchor)` over `groups`.
pub fn batch_loss(
    params: &EncoderParams,
    groups: &[Group],
    inputs: &ObjectiveInputs,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    if groups.is_empty() {
        return Err(RllError::InvalidArgument("no groups".into()));
    }
    let cache = EmbeddingCache::build(params, inputs, groups)?;
    Ok(cache.loss(groups, inputs, eta))
}

/// [`batch_loss`] and its gradient with respect to every weight and bias.
/// Confidences are constants.
pub fn loss_and_gradient(
    params: &EncoderParams,
    groups: &[Group],
    inputs: &ObjectiveInputs,
    eta: f64,
) -> Result<(f64, EncoderParams)> {
    check_eta(eta)?;
    if groups.is_empty() {
        return Err(RllError::InvalidArgument("no groups".into()));
    }
    let cache = EmbeddingCache::build(params, inputs, groups)?;
    Ok(cache.loss_and_gradient(params, groups, inputs, eta))
}

pub fn gradient(
    params: &EncoderParams,
    groups: &[Group],
    inputs: &ObjectiveInputs,
    eta: f64,
) -> Result<EncoderParams> {
    loss_and_gradient(params, groups, inputs, eta).map(|(_, g)| g)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with step `h`: `max |g - fd| / (|fd| + 1e-12)`.
pub fn finite_difference_check(
    params: &EncoderParams,
    groups: &[Group],
    inputs: &ObjectiveInputs,
    eta: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(RllError::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let analytic: Vec<f64> = gradient(params, groups, inputs, eta)?.values().collect();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let original = *probe.values_mut().nth(i).expect("index in range");
        set_coordinate(&mut probe, i, original + h);
        let up = batch_loss(&probe, groups, inputs, eta)?;
        set_coordinate(&mut probe, i, original - h);
        let down = batch_loss(&probe, groups, inputs, eta)?;
        set_coordinate(&mut probe, i, original);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g - fd).abs() / (fd.abs() + 1e-12));
    }
    Ok(worst)
}

fn set_coordinate(params: &mut EncoderParams, index: usize, value: f64) {
    *params.values_mut().nth(index).expect("index in range") = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_params(sizes: &[usize], rng: &mut rng::Rng) -> EncoderParams {
        let mut p = EncoderParams::zeros(sizes);
        p.values_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        p
    }

    fn random_features(n: usize, dim: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn inputs<'a>(features: &'a [Vec<f64>], conf: Vec<f64>) -> ObjectiveInputs<'a> {
        ObjectiveInputs::from_parts(features.iter().map(|f| &f[..]).collect(), conf).unwrap()
    }

    fn identity(dim: usize) -> EncoderParams {
        let mut p = EncoderParams::zeros(&[dim, dim]);
        for i in 0..dim {
            p.layers[0].weights[i * dim + i] = 1.0;
        }
        p
    }

    /// 2-d unit vectors with prescribed cosines to the anchor `(1, 0)`.
    fn with_relevances(rels: &[f64]) -> Vec<Vec<f64>> {
        let mut f = vec![vec![1.0, 0.0]];
        f.extend(rels.iter().map(|&r| vec![r, (1.0 - r * r).sqrt()]));
        f
    }

    fn group(k: usize) -> Group {
        Group {
            anchor: 0,
            target: 1,
            negatives: (2..2 + k).collect(),
        }
    }

    #[test]
    fn equal_relevances_give_uniform_posterior() {
        let f = with_relevances(&[0.3, 0.3, 0.3]);
        let p = group_posterior(&identity(2), &group(2), &inputs(&f, vec![1.0; 4]), 4.0).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_softmax_examples() {
        let f = with_relevances(&[0.9, 0.1, 0.1]);
        let oracle = |zt: f64, zn: f64| zt.exp() / (zt.exp() + 2.0 * zn.exp());

        let p = group_posterior(&identity(2), &group(2), &inputs(&f, vec![1.0; 4]), 1.0).unwrap();
        assert!((p - oracle(0.9, 0.1)).abs() < 1e-12);
        assert!((p - 0.52669).abs() < 5e-6);

        let conf = vec![1.0, 0.5, 1.0, 1.0];
        let p = group_posterior(&identity(2), &group(2), &inputs(&f, conf), 1.0).unwrap();
        assert!((p - oracle(0.45, 0.1)).abs() < 1e-12);
        assert!((p - 0.415045).abs() < 5e-6);
    }

    #[test]
    fn loss_examples() {
        let f = with_relevances(&[0.2, 0.2, 0.2, 0.2]);
        let inp = inputs(&f, vec![1.0; 5]);
        let one = batch_loss(&identity(2), &[group(3)], &inp, 7.0).unwrap();
        assert!((one - 4f64.ln()).abs() < 1e-12);

        let f = with_relevances(&[0.9, -0.5, 0.1]);
        let inp = inputs(&f, vec![1.0; 4]);
        let one = batch_loss(&identity(2), &[group(2)], &inp, 3.0).unwrap();
        let two = batch_loss(&identity(2), &[group(2), group(2)], &inp, 3.0).unwrap();
        assert_eq!(two, 2.0 * one);

        let mut prev = f64::INFINITY;
        for eta in [1.0, 10.0, 100.0, 1000.0] {
            let l = batch_loss(&identity(2), &[group(2)], &inp, eta).unwrap();
            assert!(l >= 0.0 && l <= prev);
            prev = l;
        }
        assert!(prev < 1e-100);
    }

    #[test]
    fn symmetric_candidates_have_zero_gradient() {
        let mut rng = rng::seeded(3);
        let params = random_params(&[3, 4, 2], &mut rng);
        let anchor = vec![0.2, -0.4, 0.9];
        let same = vec![-0.7, 0.1, 0.3];
        let f = vec![anchor, same.clone(), same.clone(), same];
        let g = gradient(&params, &[group(2)], &inputs(&f, vec![1.0; 4]), 5.0).unwrap();
        let out = g.layers.last().unwrap();
        assert!(out.bias.iter().all(|b| b.abs() < 1e-12));
        assert!(g.values().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn eta_and_confidence_enter_as_product() {
        let mut rng = rng::seeded(4);
        let params = random_params(&[3, 5, 3], &mut rng);
        let f = random_features(6, 3, &mut rng);
        let conf: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..1.0)).collect();
        let halved: Vec<f64> = conf.iter().map(|c| c / 2.0).collect();
        let groups = vec![
            Group { anchor: 0, target: 1, negatives: vec![3, 4] },
            Group { anchor: 2, target: 0, negatives: vec![5, 3] },
        ];
        let g1 = gradient(&params, &groups, &inputs(&f, conf), 3.0).unwrap();
        let g2 = gradient(&params, &groups, &inputs(&f, halved), 6.0).unwrap();
        for (a, b) in g1.values().zip(g2.values()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng::seeded(5);
        let params = random_params(&[3, 4, 2], &mut rng);
        let f = random_features(8, 3, &mut rng);
        let conf: Vec<f64> = (0..8).map(|_| rng.random_range(0.5..1.0)).collect();
        let groups: Vec<Group> = (0..5)
            .map(|i| Group { anchor: i % 3, target: (i + 1) % 3, negatives: vec![3 + i % 5, 3 + (i + 2) % 5] })
            .collect();
        let err = finite_difference_check(&params, &groups, &inputs(&f, conf), 2.0, 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn linear_encoder_gradient_is_tight() {
        let mut rng = rng::seeded(6);
        let params = random_params(&[4, 3], &mut rng);
        let f = random_features(4, 4, &mut rng);
        let err = finite_difference_check(&params, &[group(2)], &inputs(&f, vec![1.0; 4]), 2.0, 1e-5)
            .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn coarse_step_is_less_accurate() {
        let mut rng = rng::seeded(7);
        let params = random_params(&[3, 4, 2], &mut rng);
        let f = random_features(5, 3, &mut rng);
        let inp = inputs(&f, vec![1.0; 5]);
        let groups = [Group { anchor: 0, target: 1, negatives: vec![2, 3, 4] }];
        let fine = finite_difference_check(&params, &groups, &inp, 2.0, 1e-5).unwrap();
        let coarse = finite_difference_check(&params, &groups, &inp, 2.0, 1e-2).unwrap();
        assert!(coarse > fine, "coarse {coarse} vs fine {fine}");
    }

    #[test]
    fn degenerate_embedding_is_reported() {
        let params = EncoderParams::zeros(&[2, 2]);
        let f = with_relevances(&[0.5, 0.5]);
        let err = group_posterior(&params, &group(1), &inputs(&f, vec![1.0; 3]), 1.0).unwrap_err();
        assert!(matches!(err, RllError::DegenerateEmbedding));
    }

    #[test]
    fn rejects_out_of_range_groups_and_bad_eta() {
        let f = with_relevances(&[0.5]);
        let inp = inputs(&f, vec![1.0; 2]);
        assert!(batch_loss(&identity(2), &[group(1)], &inp, 1.0).is_err());
        assert!(batch_loss(&identity(2), &[], &inp, 1.0).is_err());
        let f = with_relevances(&[0.5, 0.5]);
        let inp = inputs(&f, vec![1.0; 3]);
        assert!(batch_loss(&identity(2), &[group(1)], &inp, 0.0).is_err());
    }
}
