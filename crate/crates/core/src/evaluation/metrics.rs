//! Per-case ranking metrics for a single relevant candidate.

use crate::error::{Error, Result};

/// Scores of one case and where its positive landed.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCase {
    pub scores: Vec<f64>,
    pub positive_index: usize,
    /// 1-based, pessimistic: tied negatives are placed ahead of the positive.
    pub positive_rank: usize,
    pub n_candidates: usize,
    pub negatives_below: usize,
    pub negatives_tied: usize,
}

impl RankedCase {
    /// Candidate indices by descending score; the positive goes after any
    /// negative with an equal score, negatives keep their input order.
    pub fn ordering(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_candidates).collect();
        let pos = self.positive_index;
        order.sort_by(|&a, &b| {
            self.scores[b]
                .total_cmp(&self.scores[a])
                .then_with(|| (a == pos).cmp(&(b == pos)))
        });
        order
    }

    pub fn n_negatives(&self) -> usize {
        self.n_candidates - 1
    }
}

pub fn rank_candidates(scores: Vec<f64>, positive_index: usize) -> Result<RankedCase> {
    if let Some(candidate) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore { candidate });
    }
    assert!(positive_index < scores.len(), "positive index out of range");
    let pos = scores[positive_index];
    let (mut above, mut tied, mut below) = (0, 0, 0);
    for (i, &s) in scores.iter().enumerate() {
        if i == positive_index {
            continue;
        }
        if s > pos {
            above += 1;
        } else if s == pos {
            tied += 1;
        } else {
            below += 1;
        }
    }
    Ok(RankedCase {
        n_candidates: scores.len(),
        scores,
        positive_index,
        positive_rank: 1 + above + tied,
        negatives_below: below,
        negatives_tied: tied,
    })
}

/// 1 if the positive is within the top `k`, else 0.
pub fn recall_at_k(r: &RankedCase, k: usize) -> f64 {
    if r.positive_rank <= k {
        1.0
    } else {
        0.0
    }
}

/// NDCG@k with one relevant item, so IDCG = 1.
pub fn ndcg_at_k(r: &RankedCase, k: usize) -> f64 {
    if r.positive_rank <= k {
        1.0 / ((r.positive_rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// Fraction of negatives scored below the positive, ties counting half.
/// Undefined (None) for a case without negatives.
pub fn auc_single_positive(r: &RankedCase) -> Option<f64> {
    let n = r.n_negatives();
    (n > 0).then(|| (r.negatives_below as f64 + 0.5 * r.negatives_tied as f64) / n as f64)
}

/// Positive's rank as a percentage of the pool size, in `(0, 100]`.
pub fn percentile_of_positive(r: &RankedCase) -> f64 {
    r.positive_rank as f64 / r.n_candidates as f64 * 100.0
}
