//! Ranking metrics over positive and negative scores.
//!
//! Tie conventions:
//! * Hits@k counts a positive only if it is strictly above the k-th largest
//!   negative score.
//! * ROC-AUC gives tied positive/negative pairs half credit.
//! * Average precision ranks tied negatives ahead of tied positives
//!   (pessimistic).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no positive scores")]
    NoPositives,
    #[error("no negative scores")]
    NoNegatives,
    #[error("k = {k} but only {negatives} negative scores")]
    KTooLarge { k: usize, negatives: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("score is NaN")]
    NaN,
}

/// Scores on held-out positive pairs and on sampled negative pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub y_pos: Vec<f64>,
    pub y_neg: Vec<f64>,
}

impl ScoreSet {
    pub fn new(y_pos: Vec<f64>, y_neg: Vec<f64>) -> Self {
        Self { y_pos, y_neg }
    }

    fn check(&self) -> Result<(), MetricError> {
        if self.y_pos.is_empty() {
            return Err(MetricError::NoPositives);
        }
        if self.y_neg.is_empty() {
            return Err(MetricError::NoNegatives);
        }
        if self.y_pos.iter().chain(&self.y_neg).any(|v| v.is_nan()) {
            return Err(MetricError::NaN);
        }
        Ok(())
    }
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Fraction of positives scoring strictly above the k-th largest negative.
pub fn hits_at_k(s: &ScoreSet, k: usize) -> Result<f64, MetricError> {
    s.check()?;
    if k == 0 {
        return Err(MetricError::KZero);
    }
    if k > s.y_neg.len() {
        return Err(MetricError::KTooLarge {
            k,
            negatives: s.y_neg.len(),
        });
    }
    let threshold = sorted_desc(&s.y_neg)[k - 1];
    let hits = s.y_pos.iter().filter(|&&p| p > threshold).count();
    Ok(hits as f64 / s.y_pos.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(s: &ScoreSet) -> Result<f64, MetricError> {
    s.check()?;
    let mut neg = s.y_neg.clone();
    neg.sort_by(f64::total_cmp);
    let mut credit = 0.0;
    for &p in &s.y_pos {
        let below = neg.partition_point(|&x| x < p);
        let not_above = neg.partition_point(|&x| x <= p);
        credit += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(credit / (s.y_pos.len() as f64 * s.y_neg.len() as f64))
}

/// Mean over positives of the precision at each positive's rank, with
/// negatives placed first inside a group of tied scores.
pub fn average_precision(s: &ScoreSet) -> Result<f64, MetricError> {
    s.check()?;
    // (score, is_positive); descending score, negatives before positives.
    let mut ranked: Vec<(f64, bool)> = s
        .y_pos
        .iter()
        .map(|&v| (v, true))
        .chain(s.y_neg.iter().map(|&v| (v, false)))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut seen_pos = 0usize;
    let mut total = 0.0;
    for (rank, &(_, positive)) in ranked.iter().enumerate() {
        if positive {
            seen_pos += 1;
            total += seen_pos as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / s.y_pos.len() as f64)
}
