use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};
use crate::util;

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, stratified: bool) -> Result<Self, CorpusError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CorpusError::InvalidSplit(format!(
                "train fraction {train_fraction} is outside (0, 1)"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
            stratified,
        })
    }

    /// 70/30 stratified.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            train_fraction: 0.7,
            seed,
            stratified: true,
        }
    }
}

/// Splits item indices group by group. Each group is shuffled with its own
/// seeded RNG; the first `round(min(f, 1-f) * n)` shuffled items go to the
/// smaller side. Because only the smaller side's size depends on `f`, the
/// splits for `f` and `1 - f` are exact mirrors of each other.
///
/// Returns sorted `(train, test)` index lists.
pub fn split_indices(
    group_keys: &[&str],
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    let spec = SplitSpec::new(spec.train_fraction, spec.seed, spec.stratified)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in group_keys.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    let small_fraction = spec.train_fraction.min(1.0 - spec.train_fraction);
    let train_is_small = spec.train_fraction <= 0.5;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (key, mut members) in groups {
        let n = members.len();
        if n < 2 {
            return Err(CorpusError::ClassTooSmall(key.to_string()));
        }
        let mut rng = util::rng(util::derive_seed(key, spec.seed));
        members.shuffle(&mut rng);
        let n_small = ((small_fraction * n as f64 + 0.5).floor() as usize).clamp(1, n - 1);
        let (small, large) = members.split_at(n_small);
        if train_is_small {
            train.extend_from_slice(small);
            test.extend_from_slice(large);
        } else {
            test.extend_from_slice(small);
            train.extend_from_slice(large);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Deterministic (optionally label-stratified) split of a corpus. Both sides
/// keep corpus order.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    let keys: Vec<&str> = if spec.stratified {
        corpus
            .iter()
            .map(|d| d.label.as_deref().ok_or_else(|| CorpusError::Unlabeled(d.id.clone())))
            .collect::<Result<_, _>>()?
    } else {
        vec![""; corpus.len()]
    };
    let (train_idx, test_idx) = split_indices(&keys, spec)?;
    let pick = |idx: &[usize]| Corpus {
        docs: idx.iter().map(|&i| corpus.docs[i].clone()).collect(),
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}
