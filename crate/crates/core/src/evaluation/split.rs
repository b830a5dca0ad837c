use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::labeling::LabeledDataset;
use crate::rng::{derive_seed, rng_for};

pub const MAX_SPLIT_ATTEMPTS: u64 = 100;

/// `max(1, round_half_up(fraction * n))`.
pub fn test_size(n_trials: usize, fraction: f64) -> usize {
    ((fraction * n_trials as f64 + 0.5).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSplit {
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
    /// Number of draws needed before every class appeared in training.
    pub attempts: u64,
}

/// Trial-level holdout: whole trials go to one side. Draws are repeated with
/// derived seeds until every class is present in training.
pub fn split_trials(dataset: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<TrialSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n_classes = dataset.n_classes();
    let mut per_class = vec![0usize; n_classes];
    for t in &dataset.trials {
        per_class[t.class_id] += 1;
    }
    if let Some(c) = per_class.iter().position(|&n| n < 2) {
        return Err(Error::Protocol(format!(
            "class {} has {} usable trial(s); at least 2 are required",
            dataset.class_name(c),
            per_class[c]
        )));
    }
    let n = dataset.trials.len();
    let n_test = test_size(n, test_fraction);
    if n_test >= n {
        return Err(Error::Protocol(format!(
            "holdout of {n_test} trials leaves no training data"
        )));
    }
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut rng = rng_for(derive_seed(seed, &[attempt]), &[]);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (test, train) = order.split_at(n_test);
        let mut seen = vec![false; n_classes];
        train.iter().for_each(|&i| seen[dataset.trials[i].class_id] = true);
        if seen.iter().all(|&s| s) {
            let ids = |idx: &[usize]| {
                let mut v: Vec<usize> = idx.iter().map(|&i| dataset.trials[i].trial_id).collect();
                v.sort_unstable();
                v
            };
            return Ok(TrialSplit {
                train_trials: ids(train),
                test_trials: ids(test),
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::Protocol(format!(
        "no split kept every class in training after {MAX_SPLIT_ATTEMPTS} attempts"
    )))
}

/// Dataset row indices belonging to the given trials, in dataset order.
pub fn rows_of_trials(dataset: &LabeledDataset, trial_ids: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = trial_ids.iter().copied().collect();
    dataset
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| set.contains(&r.trial_id))
        .map(|(i, _)| i)
        .collect()
}

/// Draws `m = min class count` rows of every class without replacement.
/// The result is sorted.
pub fn balanced_subsample(rows: &[usize], labels: &[usize], n_classes: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = (0..n_classes).map(|c| (c, Vec::new())).collect();
    for &r in rows {
        let c = labels[r];
        by_class
            .get_mut(&c)
            .ok_or_else(|| Error::invalid(format!("label {c} outside 0..{n_classes}")))?
            .push(r);
    }
    let m = by_class.values().map(Vec::len).min().unwrap_or(0);
    if m == 0 {
        let empty = by_class
            .iter()
            .find(|(_, v)| v.is_empty())
            .map(|(c, _)| *c)
            .unwrap_or(0);
        return Err(Error::Protocol(format!("class {empty} has no training windows")));
    }
    let mut out = Vec::with_capacity(m * n_classes);
    for (c, mut members) in by_class {
        let mut rng = rng_for(seed, &[c as u64]);
        let (picked, _) = members.partial_shuffle(&mut rng, m);
        out.extend_from_slice(picked);
    }
    out.sort_unstable();
    Ok(out)
}
