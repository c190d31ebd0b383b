use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Rng;

/// Train/test partition as sorted index lists into the original samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

fn by_class(indices: impl IntoIterator<Item = usize>, labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in indices {
        groups.entry(labels[i]).or_default().push(i);
    }
    groups
}

/// Stratified split: each class is shuffled and `round(n_class * fraction)`
/// of it goes to the test side, clamped so both sides keep at least one
/// sample of every class.
pub fn split(labels: &[usize], test_fraction: f64, rng: &mut Rng) -> Result<DatasetSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    if labels.len() < 2 {
        return Err(Error::Data(format!("cannot split {} samples", labels.len())));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut group) in by_class(0..labels.len(), labels) {
        let n = group.len();
        if n < 2 {
            return Err(Error::Data(format!(
                "class {label} has {n} sample; stratified splitting needs at least 2"
            )));
        }
        rng.shuffle(&mut group);
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        test,
        seed: rng.seed(),
        test_fraction,
    })
}

/// `k` disjoint folds over a set of indices, each sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, sorted.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Fold number of every index, for manifests.
    pub fn fold_of(&self) -> BTreeMap<usize, usize> {
        self.folds
            .iter()
            .enumerate()
            .flat_map(|(f, idx)| idx.iter().map(move |&i| (i, f)))
            .collect()
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::config(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::Data(format!("{n} samples cannot fill {k} folds")));
    }
    Ok(())
}

fn deal(order: impl IntoIterator<Item = usize>, k: usize) -> FoldPlan {
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    FoldPlan { k, folds }
}

/// Shuffles the indices and deals them round-robin into `k` folds.
pub fn kfold(indices: &[usize], k: usize, rng: &mut Rng) -> Result<FoldPlan> {
    check_k(indices.len(), k)?;
    let mut order = indices.to_vec();
    rng.shuffle(&mut order);
    Ok(deal(order, k))
}

/// Like [`kfold`], but each class is shuffled separately and the classes are
/// dealt one after another without restarting the round-robin, so fold sizes
/// and per-class fold counts both differ by at most one. `labels` is indexed
/// by the values in `indices`.
pub fn stratified_kfold(indices: &[usize], labels: &[usize], k: usize, rng: &mut Rng) -> Result<FoldPlan> {
    check_k(indices.len(), k)?;
    let mut order = Vec::with_capacity(indices.len());
    for (_, mut group) in by_class(indices.iter().copied(), labels) {
        rng.shuffle(&mut group);
        order.extend(group);
    }
    Ok(deal(order, k))
}
