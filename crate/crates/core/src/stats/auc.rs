use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned ids, binary labels and scores of one model on one subject set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(ids: Vec<String>, labels: Vec<u8>, scores: Vec<f64>) -> Result<Self> {
        if ids.len() != labels.len() || labels.len() != scores.len() {
            return Err(Error::Misaligned(format!(
                "{} ids, {} labels, {} scores",
                ids.len(),
                labels.len(),
                scores.len()
            )));
        }
        if labels.iter().any(|l| *l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(Self { ids, labels, scores })
    }

    /// Ids `0..n` as strings; convenient for tests.
    pub fn anonymous(labels: Vec<u8>, scores: Vec<f64>) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::new(ids, labels, scores)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn auc(set: &ScoreSet) -> Result<f64> {
    auc_slices(&set.labels, &set.scores)
}

/// Rank-sum AUC with mid-ranks for exact ties, O(n log n).
pub fn auc_slices(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let n_pos = labels.iter().filter(|l| **l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined("need at least one positive and one negative label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum, so mid-ranks stay integral
    let mut rank_sum_x2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j; mid-rank = (i + 1 + j) / 2
        let positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        rank_sum_x2 += positives * (i + 1 + j) as u64;
        i = j;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    // U = R - p(p+1)/2; wins + ties/2 = U, kept doubled
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * q) as f64)
}

/// Definitional O(n²) pair count: wins 1, ties ½.
pub fn auc_pairwise(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let mut twice_wins: u64 = 0;
    let mut pairs: u64 = 0;
    for (i, _) in labels.iter().enumerate().filter(|(_, l)| **l == 1) {
        for (j, _) in labels.iter().enumerate().filter(|(_, l)| **l == 0) {
            pairs += 1;
            twice_wins += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    if pairs == 0 {
        return Err(Error::AucUndefined("need at least one positive and one negative label"));
    }
    Ok(twice_wins as f64 / (2 * pairs) as f64)
}
