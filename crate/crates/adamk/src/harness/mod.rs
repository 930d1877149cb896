//! Experiment plumbing: trace records, config files, and the run pipelines.

pub mod config;
pub mod run;
pub mod trace;

pub use config::{
    DataConfig, ExperimentConfig, LipschitzConfig, ModeConfig, OptimizerConfig, ProblemConfig,
    SamplerConfig, ScheduleConfig, VariantConfig,
};
pub use run::{
    estimate_for_config, estimation_stream, run_single, run_sweep, summarize, RunOutput,
    SweepOutcome, SweepSummary,
};
pub use trace::{Trace, TraceHeader, TraceRow, CSV_COLUMNS};
