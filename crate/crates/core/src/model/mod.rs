//! Network assembly, objectives and checkpoint persistence.

pub mod checkpoint;
mod config;
mod network;
mod objective;
mod params;

pub use config::{LossKind, LstNetConfig, ScoreKind, Variant};
pub use network::{LstNetModel, WindowBatch};
pub use objective::{ar_penalty, l2_regularize_ar, loss, loss_l1, loss_l2};
pub use params::{BoundParams, ParamStore};
