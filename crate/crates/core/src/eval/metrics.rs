use indexmap::IndexMap;

use crate::{Result, RllError};

fn paired<'a>(
    pred: &'a IndexMap<String, u8>,
    truth: &'a IndexMap<String, u8>,
) -> Result<impl Iterator<Item = (u8, u8)> + 'a> {
    if pred.len() != truth.len() || pred.keys().any(|id| !truth.contains_key(id)) {
        return Err(RllError::InvalidArgument(
            "prediction and truth cover different ids".into(),
        ));
    }
    if pred.is_empty() {
        return Err(RllError::InvalidArgument("no predictions".into()));
    }
    Ok(pred.iter().map(move |(id, &p)| (p, truth[id])))
}

/// Fraction of ids whose predicted label equals the true label.
pub fn accuracy(pred: &IndexMap<String, u8>, truth: &IndexMap<String, u8>) -> Result<f64> {
    let n = pred.len();
    let correct = paired(pred, truth)?.filter(|(p, t)| p == t).count();
    Ok(correct as f64 / n as f64)
}

/// Positive-class F1, defined as 0 when precision + recall is 0.
pub fn f1(pred: &IndexMap<String, u8>, truth: &IndexMap<String, u8>) -> Result<f64> {
    let (mut tp, mut fp, mut fnc) = (0usize, 0usize, 0usize);
    for (p, t) in paired(pred, truth)? {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fnc += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fnc) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}
