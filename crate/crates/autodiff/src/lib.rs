//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every forward operation on dense `f64` matrices
//! together with its backward rule. Learnable weights live in a
//! [`ParamStore`]; [`Tape::backward`] accumulates gradients into it, and
//! [`AdamW`] / [`EmaShadow`] update it. [`grad_check`] compares the recorded
//! gradients against central finite differences.
//!
//! Shape mismatches between operands are programming errors and panic with
//! the offending shapes.

mod check;
mod error;
mod param;
mod tape;

pub use check::{grad_check, GradCheckReport};
pub use error::{Error, Result};
pub use param::{glorot_uniform, AdamW, EmaShadow, ParamId, ParamStore, Parameter};
pub use tape::{Tape, TapeStats, Var};

pub use ndarray::Array2;

/// Dense row-major matrix used for every value on the tape.
pub type Mat = ndarray::Array2<f64>;

/// Guard used by `log` and `row_l2_normalize`.
pub const EPS: f64 = 1e-12;
