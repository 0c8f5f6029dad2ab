//! Evaluation for link prediction.
//!
//! * [`metrics`]: Hits@k, ROC-AUC and average precision over a [`ScoreSet`].
//! * [`oracle`]: quadratic brute-force versions of the same metrics.
//! * [`protocol`]: scoring a held-out split through any [`PairScorer`].
//! * [`stats`]: Friedman test and Bonferroni-Dunn best/worst groups.
//! * [`table`]: per-dataset result tables with significance annotations.

pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod stats;
pub mod table;

pub use metrics::{average_precision, hits_at_k, roc_auc, MetricError, ScoreSet};
pub use protocol::{evaluate_split, score_part, EvalError, Metrics, PairScorer, Part};
pub use stats::{bonferroni_dunn_groups, friedman_test, Friedman, Groups, StatsError, Tail};
pub use table::{Cell, ResultTable, RowKey, OPTIM};
