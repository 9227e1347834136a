//! Fine-tuning loop, learning-rate schedules and multi-seed runs.

mod adam;
mod schedule;
mod trainer;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use schedule::{LrSchedule, ScheduleKind};
pub use trainer::{
    encode_all, predict_instances, run_seeds, train, training_targets, EpochRecord, SeedRun, TrainingLog,
};
