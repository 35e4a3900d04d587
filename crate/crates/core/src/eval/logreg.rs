use serde::{Deserialize, Serialize};

use crate::{Result, RllError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub iters: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            learning_rate: 0.1,
            iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

/// Sigmoid evaluated without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(RllError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let z: f64 = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        Ok(sigmoid(z))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        self.predict(x).map(|p| u8::from(p >= 0.5))
    }
}

/// Fits L2-regularized logistic regression by full-batch gradient descent
/// from zero.
///
/// Features are standardized with the training mean and standard deviation
/// before fitting, and the fitted weights are mapped back so the returned
/// model applies to raw features. The objective is the mean negative
/// log-likelihood plus `l2 / 2 · |w|²` on the standardized weights (bias
/// unpenalized). The penalty is applied as an exact proximal shrink,
/// `w ← (w - lr · ∇nll) / (1 + lr · l2)`, which stays stable for any `l2`.
pub fn train_logreg(features: &[&[f64]], labels: &[u8], cfg: &LogRegConfig) -> Result<LogisticModel> {
    if features.len() != labels.len() {
        return Err(RllError::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) || !(cfg.learning_rate > 0.0) {
        return Err(RllError::InvalidArgument(format!(
            "invalid logistic regression settings {cfg:?}"
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(RllError::InvalidArgument(
            "logistic regression needs both classes in the training set".into(),
        ));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(RllError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }

    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(*f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in scale.iter_mut().zip(*f).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let standardized: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    let shrink = 1.0 / (1.0 + cfg.learning_rate * cfg.l2);
    for _ in 0..cfg.iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, &y) in standardized.iter().zip(labels) {
            let z = b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
            let err = sigmoid(z) - f64::from(y);
            for (g, v) in grad.iter_mut().zip(x) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi = (*wi - cfg.learning_rate * g / n) * shrink;
        }
        b -= cfg.learning_rate * grad_b / n;
    }

    let weights: Vec<f64> = w.iter().zip(&scale).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    Ok(LogisticModel {
        weights,
        bias,
        l2: cfg.l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..20 {
            x.push(vec![-1.0]);
            y.push(0);
            x.push(vec![1.0]);
            y.push(1);
        }
        (x, y)
    }

    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|v| &v[..]).collect()
    }

    #[test]
    fn zero_iterations_predicts_half() {
        let (x, y) = separable();
        let cfg = LogRegConfig { iters: 0, ..LogRegConfig::default() };
        let m = train_logreg(&refs(&x), &y, &cfg).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        assert_eq!(m.predict(&[3.0]).unwrap(), 0.5);
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (x, y) = separable();
        let cfg = LogRegConfig { l2: 1e-3, ..LogRegConfig::default() };
        let m = train_logreg(&refs(&x), &y, &cfg).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| m.predict_label(xi).unwrap() == yi)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn huge_penalty_shrinks_to_half() {
        let (x, y) = separable();
        let cfg = LogRegConfig { l2: 1e6, ..LogRegConfig::default() };
        let m = train_logreg(&refs(&x), &y, &cfg).unwrap();
        assert!(m.weights[0].abs() < 1e-5);
        assert!((m.predict(&[1.0]).unwrap() - 0.5).abs() < 1e-5);
    }

    #[test]
    fn predict_examples() {
        let m = LogisticModel { weights: vec![0.0, 0.0], bias: 0.0, l2: 0.0 };
        assert_eq!(m.predict(&[4.0, -2.0]).unwrap(), 0.5);
        let m = LogisticModel { weights: vec![0.0], bias: 1000.0, l2: 0.0 };
        assert_eq!(m.predict(&[1.0]).unwrap(), 1.0);
        let m = LogisticModel { weights: vec![0.0], bias: -1000.0, l2: 0.0 };
        assert_eq!(m.predict(&[1.0]).unwrap(), 0.0);
        let m = LogisticModel { weights: vec![1.0, -1.0], bias: 0.0, l2: 0.0 };
        let oracle = 1.0 / (1.0 + (-1f64).exp());
        assert!((m.predict(&[2.0, 1.0]).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.73106).abs() < 1e-5);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let x = [vec![0.0], vec![1.0]];
        assert!(train_logreg(&refs(&x), &[1, 1], &LogRegConfig::default()).is_err());
    }
}
