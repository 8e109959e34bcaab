//! AUC and mean log loss over `(score, label)` pairs.

use crate::error::{Error, Result};
use crate::training::logloss;

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Sorts once and assigns midranks to tied groups, so it runs in
/// `O(N log N)`. Fails on single-class input.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            expected: vec![scores.len()],
            actual: vec![labels.len()],
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("AUC of NaN scores"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the midrank, 1-based
        let midrank = (start + end + 1) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += midrank * pos_in_group as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Arithmetic mean of the clamped per-sample log loss.
pub fn mean_logloss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Empty("scored set"));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape {
            expected: vec![probs.len()],
            actual: vec![labels.len()],
        });
    }
    let total: f64 = probs.iter().zip(labels).map(|(&p, &y)| logloss(p, y)).sum();
    Ok(total / probs.len() as f64)
}
