//! Friedman test and Bonferroni-Dunn grouping over a runs x methods score
//! matrix (higher score is better, rank 1 is best).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 methods, got {0}")]
    TooFewMethods(usize),
    #[error("need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("run {run} has {got} scores, expected {expected}")]
    Ragged {
        run: usize,
        got: usize,
        expected: usize,
    },
    #[error("score is NaN in run {0}")]
    NaN(usize),
    #[error("alpha {0} outside (0, 1)")]
    Alpha(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Friedman {
    pub chi_sq: f64,
    pub p_value: f64,
    /// Average rank of every method, 1 = best.
    pub mean_ranks: Vec<f64>,
    pub runs: usize,
}

fn validate(scores: &[Vec<f64>]) -> Result<usize, StatsError> {
    let n = scores.len();
    let k = scores.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(StatsError::TooFewMethods(k));
    }
    if n < 2 {
        return Err(StatsError::TooFewRuns(n));
    }
    for (run, row) in scores.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::Ragged {
                run,
                got: row.len(),
                expected: k,
            });
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(StatsError::NaN(run));
        }
    }
    Ok(k)
}

/// Ranks within one run, 1 = highest score, ties share their mean rank.
pub fn midranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Friedman chi-square statistic and its p-value with `k - 1` degrees of
/// freedom.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<Friedman, StatsError> {
    let k = validate(scores)?;
    let n = scores.len();
    let mut mean_ranks = vec![0.0; k];
    for row in scores {
        for (acc, r) in mean_ranks.iter_mut().zip(midranks(row)) {
            *acc += r;
        }
    }
    mean_ranks.iter_mut().for_each(|r| *r /= n as f64);
    let center = (k as f64 + 1.0) / 2.0;
    let spread: f64 = mean_ranks.iter().map(|r| (r - center).powi(2)).sum();
    let chi_sq = 12.0 * n as f64 / (k as f64 * (k as f64 + 1.0)) * spread;
    let dist = ChiSquared::new((k - 1) as f64).expect("k >= 2");
    let p_value = if chi_sq <= 0.0 { 1.0 } else { dist.sf(chi_sq) };
    Ok(Friedman {
        chi_sq,
        p_value,
        mean_ranks,
        runs: n,
    })
}

/// Normal quantile used for the critical difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `z(1 - alpha / (k - 1))`: each extreme group is a one-directional
    /// comparison against the top (or bottom) method.
    #[default]
    OneSided,
    /// `z(1 - alpha / (2 (k - 1)))`.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Groups {
    /// Methods (column indices) whose mean rank is within the critical
    /// difference of the best mean rank.
    pub best: Vec<usize>,
    /// Same, measured from the worst mean rank.
    pub worst: Vec<usize>,
    pub critical_difference: f64,
    pub friedman: Friedman,
}

/// Critical difference `q * sqrt(k (k + 1) / (6 n))` with a
/// Bonferroni-adjusted normal quantile `q`.
pub fn critical_difference(k: usize, n: usize, alpha: f64, tail: Tail) -> f64 {
    let comparisons = (k - 1) as f64;
    let level = match tail {
        Tail::OneSided => alpha / comparisons,
        Tail::TwoSided => alpha / (2.0 * comparisons),
    };
    let q = Normal::standard().inverse_cdf(1.0 - level);
    q * (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt()
}

/// Best and worst groups, gated on the Friedman test: when its p-value is
/// not below `alpha` both groups are empty.
pub fn bonferroni_dunn_groups(
    scores: &[Vec<f64>],
    alpha: f64,
    tail: Tail,
) -> Result<Groups, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Alpha(alpha));
    }
    let friedman = friedman_test(scores)?;
    let k = friedman.mean_ranks.len();
    let cd = critical_difference(k, friedman.runs, alpha, tail);
    if friedman.p_value >= alpha {
        return Ok(Groups {
            best: Vec::new(),
            worst: Vec::new(),
            critical_difference: cd,
            friedman,
        });
    }
    let ranks = &friedman.mean_ranks;
    let top = ranks.iter().copied().fold(f64::INFINITY, f64::min);
    let bottom = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Guard against rank sums that differ only by rounding.
    let slack = 1e-12;
    let best = (0..k).filter(|&j| ranks[j] - top <= cd + slack).collect();
    let worst = (0..k).filter(|&j| bottom - ranks[j] <= cd + slack).collect();
    Ok(Groups {
        best,
        worst,
        critical_difference: cd,
        friedman,
    })
}
