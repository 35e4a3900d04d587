use indexmap::IndexMap;
use serde::Serialize;

use crate::data::Dataset;
use crate::{Result, RllError};

/// One affine layer. `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + dot(row, x))
            .collect()
    }
}

/// Encoder weights and biases, input layer first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncoderParams {
    pub layers: Vec<DenseLayer>,
}

impl EncoderParams {
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        Self {
            layers: layer_sizes
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters, layer by layer, weights before bias.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Activations of every layer for one input; `[0]` is the input itself and
/// the last entry is the embedding.
pub(crate) fn forward_trace(params: &EncoderParams, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() != params.input_dim() {
        return Err(RllError::DimensionMismatch {
            expected: params.input_dim(),
            found: x.len(),
        });
    }
    let last = params.layers.len() - 1;
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    acts.push(x.to_vec());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut h = layer.affine(&acts[l]);
        if l < last {
            h.iter_mut().for_each(|v| *v = v.tanh());
        }
        acts.push(h);
    }
    Ok(acts)
}

/// Accumulates into `grads` the parameter gradient for one example given
/// `dL/d(embedding)`.
pub(crate) fn backprop_into(
    params: &EncoderParams,
    acts: &[Vec<f64>],
    embedding_grad: &[f64],
    grads: &mut EncoderParams,
) {
    let last = params.layers.len() - 1;
    let mut g = embedding_grad.to_vec();
    for l in (0..params.layers.len()).rev() {
        if l < last {
            for (gi, h) in g.iter_mut().zip(&acts[l + 1]) {
                *gi *= 1.0 - h * h;
            }
        }
        let layer = &params.layers[l];
        let input = &acts[l];
        let grad_layer = &mut grads.layers[l];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            let row = &mut grad_layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (w, &x) in row.iter_mut().zip(input) {
                *w += go * x;
            }
            grad_layer.bias[o] += go;
        }
        if l > 0 {
            let mut prev = vec![0.0; layer.inputs];
            for (row, &go) in layer.weights.chunks_exact(layer.inputs).zip(&g) {
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * go;
                }
            }
            g = prev;
        }
    }
}

pub fn forward(params: &EncoderParams, x: &[f64]) -> Result<Embedding> {
    let mut acts = forward_trace(params, x)?;
    Ok(Embedding(acts.pop().expect("at least one layer")))
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_relevance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.0.len() != b.0.len() {
        return Err(RllError::DimensionMismatch {
            expected: a.0.len(),
            found: b.0.len(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(RllError::DegenerateEmbedding);
    }
    Ok((dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0))
}

/// Embeds every example of `ds`, keyed by id in dataset order.
pub fn embed_dataset(params: &EncoderParams, ds: &Dataset) -> Result<IndexMap<String, Embedding>> {
    ds.examples()
        .iter()
        .map(|ex| Ok((ex.id.clone(), forward(params, &ex.features)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;
    use crate::rng;
    use rand::Rng;

    fn random_params(sizes: &[usize], seed: u64) -> EncoderParams {
        let mut rng = rng::seeded(seed);
        let mut p = EncoderParams::zeros(sizes);
        p.values_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        p
    }

    /// Straight matrix arithmetic, independent of `forward_trace`.
    fn oracle_forward(p: &EncoderParams, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (l, layer) in p.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.outputs];
            for i in 0..layer.outputs {
                let mut s = layer.bias[i];
                for j in 0..layer.inputs {
                    s += layer.weights[i * layer.inputs + j] * h[j];
                }
                out[i] = if l + 1 < p.layers.len() { s.tanh() } else { s };
            }
            h = out;
        }
        h
    }

    #[test]
    fn zero_params_give_zero_embedding() {
        let p = EncoderParams::zeros(&[3, 5, 2]);
        assert_eq!(forward(&p, &[1.0, -2.0, 3.0]).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut p = EncoderParams::zeros(&[3, 3]);
        for i in 0..3 {
            p.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = [0.5, -1.5, 2.25];
        assert_eq!(forward(&p, &x).unwrap().0, x.to_vec());
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let mut rng = rng::seeded(9);
        for seed in 0..20 {
            let p = random_params(&[6, 5, 4, 3], seed);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = forward(&p, &x).unwrap().0;
            for (a, b) in got.iter().zip(oracle_forward(&p, &x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = EncoderParams::zeros(&[3, 2]);
        assert!(matches!(
            forward(&p, &[1.0]),
            Err(RllError::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn cosine_examples() {
        let e = |v: &[f64]| Embedding(v.to_vec());
        assert!((cosine_relevance(&e(&[1.0, 2.0, 3.0]), &e(&[1.0, 2.0, 3.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_relevance(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(cosine_relevance(&e(&[1.0, 0.0]), &e(&[-1.0, 0.0])).unwrap(), -1.0);
        assert!(matches!(
            cosine_relevance(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])),
            Err(RllError::DegenerateEmbedding)
        ));
    }

    #[test]
    fn embed_dataset_matches_forward() {
        let p = random_params(&[2, 4, 3], 1);
        let ds = Dataset::new(vec![
            Example { id: "a".into(), features: vec![0.3, -0.2], crowd_labels: vec![1], expert_label: None },
            Example { id: "b".into(), features: vec![0.3, -0.2], crowd_labels: vec![0], expert_label: None },
        ])
        .unwrap();
        let emb = embed_dataset(&p, &ds).unwrap();
        assert_eq!(emb.len(), 2);
        assert_eq!(emb["a"].0.len(), 3);
        assert_eq!(emb["a"], emb["b"]);
        assert_eq!(emb["a"], forward(&p, &[0.3, -0.2]).unwrap());
    }
}
