//! Encoders, heads and the self-supervised training procedures.
//!
//! * [`config`]: encoder and training hyperparameters.
//! * [`nn`]: GCN encoder, two-layer MLP heads and the link decoder.
//! * [`loss`]: GRACE, L-GRACE, BGRL and L-BGRL objectives on a tape.
//! * [`links`]: positive/negative link sets shared by two views and
//!   Hadamard link representations.
//! * [`train`]: encoder pre-training, frozen-encoder decoder training, the
//!   jointly trained supervised GCN and the resulting link predictor.

pub mod config;
pub mod error;
pub mod links;
pub mod loss;
pub mod nn;
pub mod train;

pub use config::{Anchor, DecoderLoss, EncoderConfig, ModelKind, Norm, TrainConfig};
pub use error::{ModelError, Result};
pub use nn::{Decoder, Encoder, Mlp2, PreparedGraph, Source};
pub use links::{select_link_sets, LinkSets};
pub use loss::LinkContrast;
pub use train::{
    train_decoder, train_encoder, train_supervised_gcn, Head, LinkPredictor, TrainedEncoder,
};
