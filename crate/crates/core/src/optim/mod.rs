//! Gradient-based training: Adam and plain SGD updates, global-norm
//! clipping, and the mini-batch loop with validation-based model selection.

mod step;
mod train;

pub use step::{clip_global_norm, sgd_step, AdamState};
pub use train::{
    batch_gradients, format_training_log, train, train_with_observer, EpochRecord, OptimizerKind, StopReason, TrainRun,
    TrainSchedule,
};
