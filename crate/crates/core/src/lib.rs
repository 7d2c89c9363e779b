//! LSTNet: convolutional, recurrent and recurrent-skip networks with an
//! autoregressive highway for multivariate time-series forecasting, on top
//! of a small reverse-mode differentiation tape.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, the differentiation tape and gradient checks.
//! * [`layers`]: convolution, GRU, recurrent-skip, dense combiner,
//!   temporal attention and dropout.
//! * [`model`]: network variants, objectives and checkpoints.
//! * [`optim`]: Adam/SGD and the training loop.
//! * [`data`]: loading, normalization, splits, windows, autocorrelation and
//!   the scale-shift generator.
//! * [`baselines`]: closed-form AR and ridge (VAR) models.
//! * [`eval`]: RSE/CORR, rolling evaluation, grid search and reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over several parallel arrays read better than zipped iterators.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod data;
mod error;
pub mod eval;
pub mod io;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;

pub use error::{Error, ErrorCategory, Result};
pub use tensor::{Graph, Tensor, Var};
