use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::SubjectRecord;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Assignment of every cohort subject to one of `k` folds, aligned with
/// the cohort's record order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    k: usize,
    ids: Vec<String>,
    fold_of: Vec<usize>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.fold_of[index]
    }

    /// Record indices (ascending) in fold `f`.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    /// Record indices (ascending) outside fold `f`.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }

    pub fn to_map(&self) -> BTreeMap<String, usize> {
        self.ids.iter().cloned().zip(self.fold_of.iter().copied()).collect()
    }

    /// Rebuilds a split from a fold map; every record must be assigned.
    pub fn from_map(records: &[SubjectRecord], map: &BTreeMap<String, usize>) -> Result<Self> {
        let k = map.values().max().map_or(0, |m| m + 1);
        let fold_of = records
            .iter()
            .map(|r| {
                map.get(&r.id)
                    .copied()
                    .ok_or_else(|| Error::subject(&r.id, "not assigned to any fold"))
            })
            .collect::<Result<Vec<_>>>()?;
        if map.len() != records.len() {
            return Err(Error::Data(format!(
                "fold map has {} ids, cohort has {}",
                map.len(),
                records.len()
            )));
        }
        Ok(Self {
            k,
            ids: records.iter().map(|r| r.id.clone()).collect(),
            fold_of,
        })
    }
}

/// Seeded shuffle followed by round-robin fold assignment. With `stratify`
/// the shuffled positives are dealt before the shuffled negatives, which
/// balances label counts across folds.
pub fn kfold_split(records: &[SubjectRecord], k: usize, seed: u64, stratify: bool) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k = {k}; need at least 2 folds")));
    }
    if records.len() < k {
        return Err(Error::Data(format!(
            "cohort of {} subjects cannot be split into {k} folds",
            records.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let order: Vec<usize> = if stratify {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
            (0..records.len()).partition(|&i| records[i].label == 1);
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        pos.into_iter().chain(neg).collect()
    } else {
        let mut o: Vec<usize> = (0..records.len()).collect();
        o.shuffle(&mut rng);
        o
    };
    let mut fold_of = vec![0; records.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldSplit {
        k,
        ids: records.iter().map(|r| r.id.clone()).collect(),
        fold_of,
    })
}

/// Seeded 3:1 split; the training part has `round(0.75 n)` members (halves
/// round up). Both parts are returned in ascending order.
pub fn split_train_val(indices: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut rng_from_seed(seed));
    let n_train = (3 * shuffled.len() + 2) / 4;
    let mut val = shuffled.split_off(n_train);
    shuffled.sort_unstable();
    val.sort_unstable();
    (shuffled, val)
}
