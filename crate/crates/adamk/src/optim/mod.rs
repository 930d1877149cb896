//! Optimizer, learning-rate schedules, and the epoch runner.

mod adam;
mod runner;
mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_RHO};
pub use runner::{run_optimizer, RunMode};
pub use schedule::{Schedule, DEFAULT_ALPHA0, DEFAULT_TOTAL};
