//! Encoder and training hyperparameters.
//!
//! Training code accepts any positive sizes so small instances can be used
//! in tests; [`TrainConfig::check_search_bounds`] enforces the tuning-table
//! search space for experiment configs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GcnSupervised,
    Grace,
    Bgrl,
    Lgrace,
    Lbgrl,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        Self::GcnSupervised,
        Self::Grace,
        Self::Bgrl,
        Self::Lgrace,
        Self::Lbgrl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GcnSupervised => "gcn_supervised",
            Self::Grace => "grace",
            Self::Bgrl => "bgrl",
            Self::Lgrace => "lgrace",
            Self::Lbgrl => "lbgrl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_self_supervised(self) -> bool {
        self != Self::GcnSupervised
    }

    /// Models with an EMA target encoder.
    pub fn is_asymmetric(self) -> bool {
        matches!(self, Self::Bgrl | Self::Lbgrl)
    }

    /// Models whose objective is defined on link representations.
    pub fn is_link_level(self) -> bool {
        matches!(self, Self::Lgrace | Self::Lbgrl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Batch,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderLoss {
    LogSig,
    Bce,
}

/// Anchor of the negative sums in the L-GRACE denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// The positive link representation of the same index.
    Positive,
    /// The negative link representation of the same index.
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub layer_size: usize,
    pub norm: Norm,
    pub batchnorm_momentum: f64,
    pub weight_standardization: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            layer_size: 256,
            norm: Norm::Batch,
            batchnorm_momentum: 0.99,
            weight_standardization: false,
        }
    }
}

fn default_ema_decay() -> f64 {
    0.99
}

fn default_decoder_epochs() -> usize {
    100
}

fn default_anchor() -> Anchor {
    Anchor::Positive
}

fn default_mask_rate() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub ct_epochs: usize,
    pub batch_size: usize,
    pub gnn_lr: f64,
    pub pred_lr: f64,
    pub proj_hidden: usize,
    pub loss_func: DecoderLoss,
    pub mask_input: bool,
    pub weight_decay: f64,
    pub tau: f64,
    #[serde(default = "default_ema_decay")]
    pub ema_decay: f64,
    #[serde(default = "default_decoder_epochs")]
    pub decoder_epochs: usize,
    #[serde(default = "default_anchor")]
    pub lgrace_anchor: Anchor,
    #[serde(default)]
    pub include_positive_in_denominator: bool,
    #[serde(default = "default_mask_rate")]
    pub mask_input_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            ct_epochs: 500,
            batch_size: 1024,
            gnn_lr: 1e-3,
            pred_lr: 1e-3,
            proj_hidden: 256,
            loss_func: DecoderLoss::Bce,
            mask_input: false,
            weight_decay: 1e-5,
            tau: 0.5,
            ema_decay: default_ema_decay(),
            decoder_epochs: default_decoder_epochs(),
            lgrace_anchor: default_anchor(),
            include_positive_in_denominator: false,
            mask_input_rate: default_mask_rate(),
        }
    }
}

pub const CT_EPOCHS: [usize; 4] = [100, 500, 1500, 3000];

fn on_grid(x: f64, lo: f64, step: f64) -> bool {
    let k = (x - lo) / step;
    (k - k.round()).abs() < 1e-6
}

impl TrainConfig {
    /// Structural sanity needed by the training code.
    pub fn check(&self) -> Result<(), String> {
        let e = &self.encoder;
        if e.n_layers == 0 || e.layer_size == 0 || self.proj_hidden == 0 {
            return Err("layer sizes and layer count must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if !(self.tau > 0.0) {
            return Err(format!("tau = {} must be positive", self.tau));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(format!("ema_decay = {} outside [0, 1]", self.ema_decay));
        }
        if !(0.0..=1.0).contains(&e.batchnorm_momentum) {
            return Err(format!("batchnorm_momentum = {} outside [0, 1]", e.batchnorm_momentum));
        }
        if !(0.0..1.0).contains(&self.mask_input_rate) {
            return Err(format!("mask_input_rate = {} outside [0, 1)", self.mask_input_rate));
        }
        for (name, lr) in [("gnn_lr", self.gnn_lr), ("pred_lr", self.pred_lr)] {
            if !(lr > 0.0) {
                return Err(format!("{name} = {lr} must be positive"));
            }
        }
        Ok(())
    }

    /// Every tuned field inside its search space.
    pub fn check_search_bounds(&self) -> Result<(), String> {
        self.check()?;
        let e = &self.encoder;
        let mut errs = Vec::new();
        if !CT_EPOCHS.contains(&self.ct_epochs) {
            errs.push(format!("ct_epochs = {} not in {CT_EPOCHS:?}", self.ct_epochs));
        }
        if !(256..=6400).contains(&self.batch_size) || (self.batch_size - 256) % 64 != 0 {
            errs.push(format!("batch_size = {} not in [256, 6400] step 64", self.batch_size));
        }
        for (name, lr) in [("gnn_lr", self.gnn_lr), ("pred_lr", self.pred_lr)] {
            if !(1e-4..=1e-2).contains(&lr) {
                errs.push(format!("{name} = {lr} not in [1e-4, 1e-2]"));
            }
        }
        for (name, v) in [("proj_hidden", self.proj_hidden), ("layer_size", e.layer_size)] {
            if !(64..=512).contains(&v) || v % 64 != 0 {
                errs.push(format!("{name} = {v} not in [64, 512] step 64"));
            }
        }
        if !(1e-6..=1e-4).contains(&self.weight_decay) {
            errs.push(format!("weight_decay = {} not in [1e-6, 1e-4]", self.weight_decay));
        }
        if !(1..=4).contains(&e.n_layers) {
            errs.push(format!("n_layers = {} not in [1, 4]", e.n_layers));
        }
        if !(0.8 - 1e-9..=1.0 + 1e-9).contains(&e.batchnorm_momentum)
            || !on_grid(e.batchnorm_momentum, 0.8, 0.01)
        {
            errs.push(format!(
                "batchnorm_momentum = {} not in [0.8, 1.0] step 0.01",
                e.batchnorm_momentum
            ));
        }
        if !(0.1 - 1e-9..=0.9 + 1e-9).contains(&self.tau) || !on_grid(self.tau, 0.1, 0.1) {
            errs.push(format!("tau = {} not in [0.1, 0.9] step 0.1", self.tau));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_in_bounds() {
        assert_eq!(TrainConfig::default().check_search_bounds(), Ok(()));
    }

    #[test]
    fn out_of_bounds_fields_reported() {
        let mut c = TrainConfig::default();
        c.ct_epochs = 200;
        c.batch_size = 300;
        c.tau = 0.25;
        c.encoder.layer_size = 100;
        let err = c.check_search_bounds().unwrap_err();
        for field in ["ct_epochs", "batch_size", "tau", "layer_size"] {
            assert!(err.contains(field), "{err}");
        }
        assert!(c.check().is_ok());
    }

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(ModelKind::parse(m.as_str()), Some(m));
        }
    }
}
