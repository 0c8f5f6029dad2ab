//! Experiment harness: configuration files, seeded multi-run execution,
//! random hyperparameter search and result reporting.
//!
//! * [`config`]: TOML experiment configs.
//! * [`runner`]: per-seed training and evaluation, results directory layout.
//! * [`search`]: uniform random search over the tuning space.
//! * [`report`]: result collection, significance passes and tables.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod search;

use std::path::Path;

use lpssl_core::Graph;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use runner::{run_experiment, run_seed, ExperimentReport, SeedOutcome, DATA_ROOT_ENV};
pub use search::{random_search, SearchOutcome, SearchSpace};

/// Validation Hits@k of `cfg` on its tuning seed.
pub fn validation_score(g: &Graph, cfg: &ExperimentConfig) -> Result<f64> {
    Ok(run_seed(g, cfg, cfg.tuning_seed)?.validation.hits)
}

/// Tune `base` on the validation split of its tuning seed, then run the
/// best configuration on `base.seeds`. With `out`, the trial log goes to
/// `<run dir>/search/` next to the per-seed results.
pub fn tune_and_run(
    g: &Graph,
    base: &ExperimentConfig,
    space: &SearchSpace,
    search_seed: u64,
    workers: usize,
    out: Option<&Path>,
) -> Result<(SearchOutcome, ExperimentReport)> {
    let outcome = random_search(space, base, search_seed, workers, |c| validation_score(g, c))?;
    log::info!(
        "{} {}: best trial {} with validation hits@{} = {:.4}",
        base.dataset,
        base.run_name(),
        outcome.best,
        base.hits_k,
        outcome.best_score()
    );
    if let Some(out) = out {
        outcome.save(&runner::run_dir(out, base).join("search"))?;
    }
    let report = run_experiment(g, outcome.best_config(), out, workers)?;
    Ok((outcome, report))
}
