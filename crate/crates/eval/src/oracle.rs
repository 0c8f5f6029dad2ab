//! O(|pos| * |neg|) reference implementations of the ranking metrics.
//!
//! Same tie conventions as [`crate::metrics`], written as direct pair
//! counting so they can serve as test oracles.

use crate::metrics::ScoreSet;

/// A positive is a hit iff fewer than `k` negatives score at least as high.
pub fn hits_at_k(s: &ScoreSet, k: usize) -> f64 {
    let hits = s
        .y_pos
        .iter()
        .filter(|&&p| s.y_neg.iter().filter(|&&n| n >= p).count() < k)
        .count();
    hits as f64 / s.y_pos.len() as f64
}

pub fn roc_auc(s: &ScoreSet) -> f64 {
    let mut credit = 0.0;
    for &p in &s.y_pos {
        for &n in &s.y_neg {
            if p > n {
                credit += 1.0;
            } else if p == n {
                credit += 0.5;
            }
        }
    }
    credit / (s.y_pos.len() as f64 * s.y_neg.len() as f64)
}

/// Precision at positive `i` counts every positive ranked above it (higher
/// score, or equal score and lower index) and every negative scoring at
/// least as high.
pub fn average_precision(s: &ScoreSet) -> f64 {
    let mut terms: Vec<(f64, usize, f64)> = Vec::with_capacity(s.y_pos.len());
    for (i, &p) in s.y_pos.iter().enumerate() {
        let pos_before = s
            .y_pos
            .iter()
            .enumerate()
            .filter(|&(j, &q)| q > p || (q == p && j < i))
            .count();
        let neg_ge = s.y_neg.iter().filter(|&&n| n >= p).count();
        let precision = (1 + pos_before) as f64 / (1 + pos_before + neg_ge) as f64;
        terms.push((p, i, precision));
    }
    // Sum in rank order so rounding matches the sorted implementation.
    terms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    terms.iter().map(|t| t.2).sum::<f64>() / s.y_pos.len() as f64
}
