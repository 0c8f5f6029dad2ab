//! Seeded uniform random hyperparameter search.

use std::path::Path;

use lpssl_core::community::DetectorKind;
use lpssl_core::seed;
use lpssl_models::config::CT_EPOCHS;
use lpssl_models::{DecoderLoss, Norm};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Real interval, sampled uniformly (in log space when `log`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatRange {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log: bool,
}

/// `lo, lo + step, ..., hi`, sampled uniformly. Also used for real grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

fn snap(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

impl FloatRange {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo >= self.hi {
            return self.lo;
        }
        let x = if self.log {
            rng.random_range(self.lo.ln()..=self.hi.ln()).exp()
        } else {
            rng.random_range(self.lo..=self.hi)
        };
        x.clamp(self.lo, self.hi)
    }
}

impl GridRange {
    fn points(&self) -> u64 {
        if self.step <= 0.0 || self.hi <= self.lo {
            0
        } else {
            ((self.hi - self.lo) / self.step + 1e-9).floor() as u64
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..=self.points());
        snap(self.lo + k as f64 * self.step)
    }

    fn sample_int<R: Rng>(&self, rng: &mut R) -> usize {
        self.sample(rng).round() as usize
    }
}

fn pick<T: Copy, R: Rng>(choices: &[T], fallback: T, rng: &mut R) -> T {
    if choices.is_empty() {
        fallback
    } else {
        choices[rng.random_range(0..choices.len())]
    }
}

fn default_budget() -> usize {
    25
}

/// Per-field ranges and choices of the tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    #[serde(default = "default_budget")]
    pub budget: usize,
    pub ct_epochs: Vec<usize>,
    pub batch_size: GridRange,
    pub gnn_lr: FloatRange,
    pub pred_lr: FloatRange,
    pub proj_hidden: GridRange,
    pub loss_func: Vec<DecoderLoss>,
    pub mask_input: Vec<bool>,
    pub weight_decay: FloatRange,
    pub n_layers: GridRange,
    pub layer_size: GridRange,
    pub norm: Vec<Norm>,
    pub batchnorm_momentum: GridRange,
    pub weight_standardization: Vec<bool>,
    pub tau: GridRange,
    /// Shared range of the four drop rates.
    pub drop_rate: GridRange,
    /// Detectors with a usable implementation; Leiden and Infomap need
    /// partition files.
    pub detectors: Vec<DetectorKind>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            ct_epochs: CT_EPOCHS.to_vec(),
            batch_size: GridRange { lo: 256.0, hi: 6400.0, step: 64.0 },
            gnn_lr: FloatRange { lo: 1e-4, hi: 1e-2, log: true },
            pred_lr: FloatRange { lo: 1e-4, hi: 1e-2, log: true },
            proj_hidden: GridRange { lo: 64.0, hi: 512.0, step: 64.0 },
            loss_func: vec![DecoderLoss::LogSig, DecoderLoss::Bce],
            mask_input: vec![true, false],
            weight_decay: FloatRange { lo: 1e-6, hi: 1e-4, log: true },
            n_layers: GridRange { lo: 1.0, hi: 4.0, step: 1.0 },
            layer_size: GridRange { lo: 64.0, hi: 512.0, step: 64.0 },
            norm: vec![Norm::Batch, Norm::Layer],
            batchnorm_momentum: GridRange { lo: 0.8, hi: 1.0, step: 0.01 },
            weight_standardization: vec![true, false],
            tau: GridRange { lo: 0.1, hi: 0.9, step: 0.1 },
            drop_rate: GridRange { lo: 0.0, hi: 0.9, step: 0.1 },
            detectors: vec![DetectorKind::Louvain],
        }
    }
}

impl SearchSpace {
    /// `base` with every tuned field drawn from the space.
    pub fn sample<R: Rng>(&self, base: &ExperimentConfig, rng: &mut R) -> ExperimentConfig {
        let mut c = base.clone();
        let t = &mut c.train;
        t.ct_epochs = pick(&self.ct_epochs, t.ct_epochs, rng);
        t.batch_size = self.batch_size.sample_int(rng);
        t.gnn_lr = self.gnn_lr.sample(rng);
        t.pred_lr = self.pred_lr.sample(rng);
        t.proj_hidden = self.proj_hidden.sample_int(rng);
        t.loss_func = pick(&self.loss_func, t.loss_func, rng);
        t.mask_input = pick(&self.mask_input, t.mask_input, rng);
        t.weight_decay = self.weight_decay.sample(rng);
        t.encoder.n_layers = self.n_layers.sample_int(rng);
        t.encoder.layer_size = self.layer_size.sample_int(rng);
        t.encoder.norm = pick(&self.norm, t.encoder.norm, rng);
        t.encoder.batchnorm_momentum = self.batchnorm_momentum.sample(rng);
        t.encoder.weight_standardization = pick(&self.weight_standardization, t.encoder.weight_standardization, rng);
        t.tau = self.tau.sample(rng);
        let a = &mut c.augmentation;
        a.drop_edge_rate_1 = self.drop_rate.sample(rng);
        a.drop_edge_rate_2 = self.drop_rate.sample(rng);
        a.drop_feature_rate_1 = self.drop_rate.sample(rng);
        a.drop_feature_rate_2 = self.drop_rate.sample(rng);
        a.detector = pick(&self.detectors, a.detector, rng);
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trial {
    pub index: usize,
    pub config: ExperimentConfig,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub trials: Vec<Trial>,
    /// Index of the best trial.
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_config(&self) -> &ExperimentConfig {
        &self.trials[self.best].config
    }

    pub fn best_score(&self) -> f64 {
        self.trials[self.best].score.expect("best trial has a score")
    }

    /// Write `trials.json` (every trial) and `best.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let log = serde_json::to_string_pretty(&self.trials).map_err(|e| HarnessError::Results(e.to_string()))?;
        let p = dir.join("trials.json");
        std::fs::write(&p, log).map_err(|e| HarnessError::io(&p, e))?;
        self.best_config().save(&dir.join("best.toml"))
    }
}

/// Score `space.budget` configurations drawn from `space` around `base` and
/// return them all with the argmax. Trial `i` uses a seed derived from
/// `(seed, i)`, so results do not depend on `workers`. Ties go to the
/// earliest trial; failed or non-finite trials never win.
pub fn random_search<F>(
    space: &SearchSpace,
    base: &ExperimentConfig,
    seed: u64,
    workers: usize,
    objective: F,
) -> Result<SearchOutcome>
where
    F: Fn(&ExperimentConfig) -> Result<f64> + Sync,
{
    let configs: Vec<ExperimentConfig> = (0..space.budget)
        .map(|i| space.sample(base, &mut seed::rng(seed::derive_indexed(seed, "trial", i as u64))))
        .collect();
    let pool = crate::runner::worker_pool(workers)?;
    let trials: Vec<Trial> = pool.install(|| {
        configs
            .into_par_iter()
            .enumerate()
            .map(|(index, config)| {
                let (score, error) = match objective(&config) {
                    Ok(s) if s.is_finite() => (Some(s), None),
                    Ok(s) => (None, Some(format!("non-finite objective {s}"))),
                    Err(e) => (None, Some(e.to_string())),
                };
                if let Some(e) = &error {
                    log::warn!("trial {index} failed: {e}");
                }
                Trial { index, config, score, error }
            })
            .collect()
    });
    let best = trials
        .iter()
        .filter_map(|t| t.score.map(|s| (t.index, s)))
        .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
        .ok_or(HarnessError::AllTrialsFailed(space.budget))?;
    Ok(SearchOutcome { trials, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_bounds() {
        let space = SearchSpace::default();
        let base = ExperimentConfig::default();
        let mut rng = seed::rng(11);
        for _ in 0..10_000 {
            let c = space.sample(&base, &mut rng);
            c.check_search_bounds().unwrap();
        }
    }

    #[test]
    fn single_trial_is_returned() {
        let space = SearchSpace { budget: 1, ..SearchSpace::default() };
        let base = ExperimentConfig::default();
        let out = random_search(&space, &base, 4, 1, |_| Ok(0.3)).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best, 0);
        let expected = space.sample(&base, &mut seed::rng(seed::derive_indexed(4, "trial", 0)));
        assert_eq!(out.best_config(), &expected);
    }

    #[test]
    fn rigged_objective_selects_max_tau() {
        let space = SearchSpace::default();
        let base = ExperimentConfig::default();
        let out = random_search(&space, &base, 9, 4, |c| Ok(c.train.tau)).unwrap();
        let max = out.trials.iter().map(|t| t.config.train.tau).fold(f64::MIN, f64::max);
        assert_eq!(out.best_config().train.tau, max);
        let again = random_search(&space, &base, 9, 1, |c| Ok(c.train.tau)).unwrap();
        assert_eq!(again.best, out.best);
    }

    #[test]
    fn failures_are_logged_and_skipped() {
        let space = SearchSpace { budget: 6, ..SearchSpace::default() };
        let base = ExperimentConfig::default();
        let out = random_search(&space, &base, 2, 2, |c| {
            if c.train.tau > 0.5 {
                Err(HarnessError::Config("rigged".into()))
            } else {
                Ok(c.train.tau)
            }
        });
        match out {
            Ok(o) => {
                assert!(o.trials.iter().any(|t| t.error.is_some()) || o.trials.iter().all(|t| t.config.train.tau <= 0.5));
                assert!(o.best_config().train.tau <= 0.5);
            }
            Err(e) => assert!(matches!(e, HarnessError::AllTrialsFailed(6))),
        }
        let all_fail = random_search(&space, &base, 2, 2, |_| Err(HarnessError::Config("x".into())));
        assert!(matches!(all_fail, Err(HarnessError::AllTrialsFailed(6))));
        let dir = tempfile::tempdir().unwrap();
        let ok = random_search(&space, &base, 2, 2, |c| Ok(c.train.gnn_lr)).unwrap();
        ok.save(dir.path()).unwrap();
        let best = ExperimentConfig::load(&dir.path().join("best.toml")).unwrap();
        assert_eq!(&best, ok.best_config());
    }
}
