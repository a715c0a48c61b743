//! Momentum SGD, the staged learning-rate schedule and the training loop.

mod eval;
mod schedule;
mod sgd;
mod train;

pub use eval::{accuracy, adversarial_accuracy, adversarial_set, embeddings, predict, probe_distance, EVAL_BATCH};
pub use schedule::{parse_schedule, ScheduleSpec, STAGE_FACTORS};
pub use sgd::{sgd_step, MomentumState};
pub use train::{
    init_params, train, ProbeRecord, StepRecord, TrainConfig, TrainData, TrainFailure, TrainObserver, TrainResult,
    TrainStats, DEFAULT_BATCH, DEFAULT_MOMENTUM, METRICS_HEADER,
};
