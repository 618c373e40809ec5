//! Adam and the full-batch training loop.

mod adam;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{
    confidence_band, repeat_runs, train, ConfidenceBand, EpochRecord, Objective, TrainConfig, TrainOutcome,
    TrainRecord, TrainStatus,
};
