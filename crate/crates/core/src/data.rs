//! Crowdsourced dataset model, JSON-lines I/O and stratified fold splitting.
//!
//! A dataset file holds one JSON object per line:
//!
//! ```text
//! {"id":"ex-0","features":[0.1,-1.2],"crowd_labels":[1,0,1],"expert_label":1}
//! ```
//!
//! Worker slot `j` is positional: the `j`-th crowd label of every example
//! comes from the same slot, but workers are not tracked across examples.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Result, RllError};

/// One data instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub features: Vec<f64>,
    /// One 0/1 label per worker slot.
    pub crowd_labels: Vec<u8>,
    /// Ground truth; read only by evaluation code.
    pub expert_label: Option<u8>,
}

impl Example {
    pub fn positive_votes(&self) -> usize {
        self.crowd_labels.iter().filter(|&&y| y == 1).count()
    }
}

/// A validated, non-empty collection of examples with a common feature
/// dimension and worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    feature_dim: usize,
    worker_count: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| RllError::InvalidDataset("dataset has no examples".into()))?;
        let feature_dim = first.features.len();
        let worker_count = first.crowd_labels.len();
        if feature_dim == 0 {
            return Err(RllError::InvalidDataset("feature_dim must be positive".into()));
        }
        if worker_count == 0 {
            return Err(RllError::InvalidDataset("worker_count must be positive".into()));
        }

        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            validate_example(ex, feature_dim, worker_count)?;
            if !seen.insert(ex.id.as_str()) {
                return Err(RllError::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Self {
            examples,
            feature_dim,
            worker_count,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    pub fn get(&self, index: usize) -> &Example {
        &self.examples[index]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|ex| ex.id.as_str())
    }

    /// Expert labels in dataset order, failing on the first missing one.
    pub fn expert_labels(&self) -> Result<Vec<u8>> {
        self.examples
            .iter()
            .map(|ex| {
                ex.expert_label
                    .ok_or_else(|| RllError::MissingExpertLabel(ex.id.clone()))
            })
            .collect()
    }

    /// A new dataset made of the examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.examples[i].clone()).collect())
    }

    /// Copy with every expert label removed.
    pub fn without_expert_labels(&self) -> Self {
        let examples = self
            .examples
            .iter()
            .map(|ex| Example {
                expert_label: None,
                ..ex.clone()
            })
            .collect();
        Self {
            examples,
            feature_dim: self.feature_dim,
            worker_count: self.worker_count,
        }
    }

    /// Keeps only the first `workers` crowd-label slots of every example.
    pub fn truncate_workers(&self, workers: usize) -> Result<Self> {
        if workers == 0 || workers > self.worker_count {
            return Err(RllError::InvalidArgument(format!(
                "cannot keep {workers} worker slots of {}",
                self.worker_count
            )));
        }
        let examples = self
            .examples
            .iter()
            .map(|ex| Example {
                crowd_labels: ex.crowd_labels[..workers].to_vec(),
                ..ex.clone()
            })
            .collect();
        Ok(Self {
            examples,
            feature_dim: self.feature_dim,
            worker_count: workers,
        })
    }
}

fn validate_example(ex: &Example, feature_dim: usize, worker_count: usize) -> Result<()> {
    if ex.features.len() != feature_dim {
        return Err(RllError::InconsistentFeatureDim {
            id: ex.id.clone(),
            expected: feature_dim,
            found: ex.features.len(),
        });
    }
    if ex.crowd_labels.len() != worker_count {
        return Err(RllError::InconsistentWorkerCount {
            id: ex.id.clone(),
            expected: worker_count,
            found: ex.crowd_labels.len(),
        });
    }
    if let Some(bad) = ex.features.iter().find(|v| !v.is_finite()) {
        return Err(RllError::InvalidDataset(format!(
            "non-finite feature {bad} in example {}",
            ex.id
        )));
    }
    for &y in ex.crowd_labels.iter().chain(ex.expert_label.iter()) {
        if y > 1 {
            return Err(RllError::InvalidLabel {
                id: ex.id.clone(),
                value: i64::from(y),
            });
        }
    }
    Ok(())
}

/// On-disk record; labels are parsed as wide integers so out-of-range values
/// are reported as label errors rather than parse errors.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    features: Vec<f64>,
    crowd_labels: Vec<i64>,
    expert_label: Option<i64>,
}

fn to_label(id: &str, value: i64) -> Result<u8> {
    match value {
        0 | 1 => Ok(value as u8),
        _ => Err(RllError::InvalidLabel {
            id: id.to_string(),
            value,
        }),
    }
}

/// Reads a JSON-lines dataset. Blank lines are skipped; record order is kept.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut examples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| RllError::MalformedRecord {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        let crowd_labels = raw
            .crowd_labels
            .iter()
            .map(|&y| to_label(&raw.id, y))
            .collect::<Result<Vec<_>>>()?;
        let expert_label = raw.expert_label.map(|y| to_label(&raw.id, y)).transpose()?;
        examples.push(Example {
            id: raw.id,
            features: raw.features,
            crowd_labels,
            expert_label,
        });
    }
    Dataset::new(examples)
}

pub fn dataset_to_jsonl(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for ex in ds.examples() {
        serde_json::to_writer(&mut buf, ex)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

/// Writes `ds` as JSON lines, atomically.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &dataset_to_jsonl(ds)?)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| RllError::Io(e.error))?;
    Ok(())
}

/// Assignment of every example to one of `folds` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldAssignment {
    folds: usize,
    fold_of: IndexMap<String, usize>,
}

impl FoldAssignment {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.fold_of.get(id).copied()
    }

    pub fn as_map(&self) -> &IndexMap<String, usize> {
        &self.fold_of
    }

    /// Dataset indices in the held-out fold, in dataset order.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .values()
            .enumerate()
            .filter_map(|(i, &f)| (f == fold).then_some(i))
            .collect()
    }

    /// Dataset indices outside the held-out fold, in dataset order.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .values()
            .enumerate()
            .filter_map(|(i, &f)| (f != fold).then_some(i))
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified `folds`-way split keyed on the expert label.
///
/// Positives and negatives are shuffled separately, then dealt round-robin
/// into folds: positives first, negatives continuing from the fold where the
/// positives stopped. Fold sizes therefore differ by at most one, and so do
/// per-fold positive counts.
pub fn stratified_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return Err(RllError::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if folds > ds.len() {
        return Err(RllError::InvalidArgument(format!(
            "{folds} folds exceed dataset size {}",
            ds.len()
        )));
    }
    let labels = ds.expert_labels()?;
    let mut positives: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == 1).collect();
    let mut negatives: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == 0).collect();
    let mut rng = rng::seeded(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut assigned = vec![0usize; ds.len()];
    for (slot, &i) in positives.iter().chain(negatives.iter()).enumerate() {
        assigned[i] = slot % folds;
    }
    let fold_of = ds
        .ids()
        .zip(assigned)
        .map(|(id, f)| (id.to_string(), f))
        .collect();
    Ok(FoldAssignment { folds, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(id: &str, features: Vec<f64>, labels: &[u8], expert: Option<u8>) -> Example {
        Example {
            id: id.to_string(),
            features,
            crowd_labels: labels.to_vec(),
            expert_label: expert,
        }
    }

    fn labelled(n: usize, positives: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| {
                    let y = u8::from(i < positives);
                    example(&format!("e{i}"), vec![i as f64], &[y, y, y], Some(y))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_empty_and_inconsistent() {
        assert!(matches!(Dataset::new(vec![]), Err(RllError::InvalidDataset(_))));
        let err = Dataset::new(vec![
            example("a", vec![0.0; 3], &[1, 0, 1, 1, 0], None),
            example("b", vec![0.0; 3], &[1, 0, 1, 1], None),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("inconsistent worker_count"));
        let err = Dataset::new(vec![
            example("a", vec![0.0; 3], &[1], None),
            example("b", vec![0.0; 2], &[1], None),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("inconsistent feature_dim"));
        let err = Dataset::new(vec![
            example("a", vec![0.0], &[1], None),
            example("a", vec![0.0], &[1], None),
        ])
        .unwrap_err();
        assert!(matches!(err, RllError::DuplicateId(_)));
        let err = Dataset::new(vec![example("a", vec![0.0], &[2], None)]).unwrap_err();
        assert!(matches!(err, RllError::InvalidLabel { .. }));
    }

    #[test]
    fn ten_examples_five_folds() {
        let ds = labelled(10, 6);
        for seed in 0..20 {
            let folds = stratified_folds(&ds, 5, seed).unwrap();
            assert_eq!(folds.fold_sizes(), vec![2; 5]);
            for f in 0..5 {
                let pos = folds
                    .test_indices(f)
                    .iter()
                    .filter(|&&i| ds.get(i).expert_label == Some(1))
                    .count();
                assert!(pos == 1 || pos == 2, "fold {f} has {pos} positives");
            }
        }
    }

    #[test]
    fn folds_are_deterministic() {
        let ds = labelled(37, 20);
        assert_eq!(
            stratified_folds(&ds, 5, 11).unwrap(),
            stratified_folds(&ds, 5, 11).unwrap()
        );
        assert_ne!(
            stratified_folds(&ds, 5, 11).unwrap(),
            stratified_folds(&ds, 5, 12).unwrap()
        );
    }

    #[test]
    fn fold_preconditions() {
        let ds = labelled(4, 2);
        assert!(stratified_folds(&ds, 1, 0).is_err());
        assert!(stratified_folds(&ds, 5, 0).is_err());
        let unlabelled = ds.without_expert_labels();
        assert!(matches!(
            stratified_folds(&unlabelled, 2, 0),
            Err(RllError::MissingExpertLabel(_))
        ));
    }

    #[test]
    fn truncation_keeps_prefix() {
        let ds = Dataset::new(vec![example("a", vec![1.0], &[1, 0, 1, 1, 0], Some(1))]).unwrap();
        let t = ds.truncate_workers(3).unwrap();
        assert_eq!(t.worker_count(), 3);
        assert_eq!(t.get(0).crowd_labels, vec![1, 0, 1]);
        assert_eq!(ds.truncate_workers(5).unwrap(), ds);
        assert!(ds.truncate_workers(6).is_err());
        assert!(ds.truncate_workers(0).is_err());
    }
}
