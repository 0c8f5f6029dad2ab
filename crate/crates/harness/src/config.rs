//! Experiment configuration files.
//!
//! A config is TOML: top-level keys for the dataset, model, seeds and every
//! training hyperparameter, with `[encoder]`, `[augmentation]` and `[split]`
//! tables.
//!
//! ```toml
//! dataset = "usair"
//! model = "lgrace"
//! seeds = [1, 2, 3]
//! ct_epochs = 500
//! batch_size = 1024
//! tau = 0.5
//!
//! [encoder]
//! n_layers = 2
//! layer_size = 256
//! norm = "batch"
//! batchnorm_momentum = 0.99
//! weight_standardization = false
//!
//! [augmentation]
//! kind = "random"
//! drop_edge_rate_1 = 0.2
//! drop_edge_rate_2 = 0.3
//! ```

use std::path::{Path, PathBuf};

use lpssl_core::augment::{AugKind, AugmentationSpec};
use lpssl_core::graph::SplitFractions;
use lpssl_models::{ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_k() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub model: ModelKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed whose validation split scores search trials.
    #[serde(default)]
    pub tuning_seed: u64,
    /// `k` of the headline Hits@k metric.
    #[serde(default = "default_k")]
    pub hits_k: usize,
    /// Directory of external partitions (`<dataset>.<detector>.part`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub train: TrainConfig,
    pub augmentation: AugmentationSpec,
    #[serde(default)]
    pub split: SplitFractions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "usair".into(),
            model: ModelKind::Grace,
            seeds: default_seeds(),
            tuning_seed: 0,
            hits_k: default_k(),
            partition_dir: None,
            train: TrainConfig::default(),
            augmentation: AugmentationSpec::new(AugKind::Random).with_rates((0.2, 0.2), (0.1, 0.1)),
            split: SplitFractions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| HarnessError::io(path, e))
    }

    /// Structural validity: everything the runner needs to proceed.
    pub fn check(&self) -> Result<()> {
        self.train.check().map_err(HarnessError::Config)?;
        self.augmentation.validate().map_err(HarnessError::Config)?;
        self.split.validate()?;
        if self.hits_k == 0 {
            return Err(HarnessError::Config("hits_k must be positive".into()));
        }
        Ok(())
    }

    /// Every tuned field inside the tuning search space.
    pub fn check_search_bounds(&self) -> Result<()> {
        self.check()?;
        self.train.check_search_bounds().map_err(HarnessError::Config)?;
        let a = &self.augmentation;
        for (name, r) in [
            ("drop_edge_rate_1", a.drop_edge_rate_1),
            ("drop_edge_rate_2", a.drop_edge_rate_2),
            ("drop_feature_rate_1", a.drop_feature_rate_1),
            ("drop_feature_rate_2", a.drop_feature_rate_2),
        ] {
            let k = r / 0.1;
            if !(-1e-9..=0.9 + 1e-9).contains(&r) || (k - k.round()).abs() > 1e-6 {
                return Err(HarnessError::Config(format!("{name} = {r} not in [0, 0.9] step 0.1")));
            }
        }
        Ok(())
    }

    /// Augmentation column label; the supervised baseline has none.
    pub fn augmentation_label(&self) -> &'static str {
        if self.model.is_self_supervised() {
            self.augmentation.kind.as_str()
        } else {
            "none"
        }
    }

    /// `<model>_<augmentation>` directory name.
    pub fn run_name(&self) -> String {
        format!("{}_{}", self.model.as_str(), self.augmentation_label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lpssl_core::community::DetectorKind;
    use lpssl_models::{Anchor, DecoderLoss, Norm};

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = ExperimentConfig::default();
        cfg.model = ModelKind::Lgrace;
        cfg.seeds = vec![3, 1, 4];
        cfg.train.tau = 0.3;
        cfg.train.gnn_lr = 0.0012345678901234;
        cfg.train.loss_func = DecoderLoss::LogSig;
        cfg.train.mask_input = true;
        cfg.train.lgrace_anchor = Anchor::Negative;
        cfg.train.encoder.norm = Norm::Layer;
        cfg.augmentation = AugmentationSpec::new(AugKind::Sbm2Oracle);
        cfg.augmentation.detector = DetectorKind::Infomap;
        cfg.partition_dir = Some("parts".into());
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg, "{text}");
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_toml().unwrap()).unwrap(), d);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"
            dataset = "power"
            model = "bgrl"
            ct_epochs = 100
            batch_size = 512
            gnn_lr = 0.001
            pred_lr = 0.001
            proj_hidden = 128
            loss_func = "bce"
            mask_input = false
            weight_decay = 1e-5
            tau = 0.5

            [encoder]
            n_layers = 2
            layer_size = 128
            norm = "batch"
            batchnorm_momentum = 0.9
            weight_standardization = false

            [augmentation]
            kind = "sbm_oracle"
            commu_detect = "louvain"
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.seeds, (1..=10).collect::<Vec<_>>());
        assert_eq!(cfg.train.ema_decay, 0.99);
        assert_eq!(cfg.augmentation.kind, AugKind::SbmOracle);
        assert_eq!(cfg.run_name(), "bgrl_sbm_oracle");
        cfg.check_search_bounds().unwrap();
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.augmentation.drop_edge_rate_1 = 0.25;
        assert!(cfg.check_search_bounds().is_err());
        let text = ExperimentConfig::default().to_toml().unwrap().replace("tau = 0.5", "tau = -1.0");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
