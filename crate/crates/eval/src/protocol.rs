//! Held-out evaluation of a trained link predictor.

use lpssl_core::graph::{sample_negative_pairs, Edge, EdgeSplit};
use serde::{Deserialize, Serialize};

use crate::metrics::{average_precision, hits_at_k, roc_auc, MetricError, ScoreSet};

/// Anything that maps node pairs to link scores (higher = more likely).
pub trait PairScorer {
    /// One score per pair, in input order.
    fn score_pairs(&self, pairs: &[Edge]) -> Vec<f64>;
}

impl<F: Fn(&[Edge]) -> Vec<f64>> PairScorer for F {
    fn score_pairs(&self, pairs: &[Edge]) -> Vec<f64> {
        self(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hits: f64,
    pub ap: f64,
    pub auc: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] lpssl_core::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("scorer returned {got} scores for {expected} pairs")]
    ScoreCount { got: usize, expected: usize },
}

/// Which held-out positives to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Validation,
    Test,
}

/// The score set of one split part: positives from the part, an equal number
/// of negatives sampled with `seed` among pairs that are positive nowhere in
/// the split.
pub fn score_part(
    scorer: &dyn PairScorer,
    split: &EdgeSplit,
    part: Part,
    seed: u64,
) -> Result<ScoreSet, EvalError> {
    let positives = match part {
        Part::Validation => &split.val_pos,
        Part::Test => &split.test_pos,
    };
    let negatives = sample_negative_pairs(
        &split.train_graph,
        positives.len(),
        &split.all_positives(),
        seed,
    )?;
    let y_pos = scorer.score_pairs(positives);
    let y_neg = scorer.score_pairs(&negatives);
    for (got, expected) in [(y_pos.len(), positives.len()), (y_neg.len(), negatives.len())] {
        if got != expected {
            return Err(EvalError::ScoreCount { got, expected });
        }
    }
    Ok(ScoreSet::new(y_pos, y_neg))
}

/// All three metrics on one score set; `k` is clamped to the number of
/// negatives.
pub fn metrics(s: &ScoreSet, k: usize) -> Result<Metrics, MetricError> {
    Ok(Metrics {
        hits: hits_at_k(s, k.min(s.y_neg.len()))?,
        ap: average_precision(s)?,
        auc: roc_auc(s)?,
    })
}

/// Hits@k, AP and ROC-AUC on the test positives of `split`.
pub fn evaluate_split(
    scorer: &dyn PairScorer,
    split: &EdgeSplit,
    k: usize,
    seed: u64,
) -> Result<Metrics, EvalError> {
    let s = score_part(scorer, split, Part::Test, seed)?;
    Ok(metrics(&s, k)?)
}
