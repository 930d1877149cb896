//! Single runs and schedule sweeps.
//!
//! RNG stream layout, all forked from `RngStream::new(config.seed)`:
//! variant `i`'s training shuffles use `fork(i)` (a solo run is variant 0),
//! the Lipschitz estimator's samples fork from `fork(1 << 32)`, and the
//! estimator's batch partition from `fork((1 << 32) + 1)`. Model
//! initialization draws from `RngStream::new(seed)` directly, so every
//! variant of a sweep starts from bit-identical weights and the derived rate
//! is the same whether a config runs solo or inside a sweep.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::data::{partition_batches, Problem};
use crate::error::{Error, Result};
use crate::harness::config::{sanitize_label, ExperimentConfig, ScheduleConfig};
use crate::harness::Trace;
use crate::ioutil;
use crate::lipschitz::{
    derive_step_size, estimate_lipschitz_fullbatch, estimate_lipschitz_minibatch,
    LipschitzEstimate, StepSizeInputs,
};
use crate::numerics::RngStream;
use crate::optim::{run_optimizer, AdamConfig, RunMode, Schedule};

const LIPSCHITZ_SAMPLE_STREAM: u64 = 1 << 32;
const LIPSCHITZ_PARTITION_STREAM: u64 = (1 << 32) + 1;

/// The stream the estimator samples weights from for a given experiment
/// seed. Shared by [`estimate_for_config`] and the convergence probe so a
/// probe point at `n = lipschitz.samples` reproduces the training estimate
/// bit-for-bit.
pub fn estimation_stream(seed: u64) -> RngStream {
    RngStream::new(seed).fork(LIPSCHITZ_SAMPLE_STREAM)
}

/// The estimate a derived-rate run of this config would use: full-dataset
/// gradients in full-batch mode, max over the seeded batch partition in
/// mini-batch mode, streams forked per the module layout. Exposed so an
/// estimate printed on its own is bit-identical to the one a training run
/// consumes.
pub fn estimate_for_config(
    config: &ExperimentConfig,
    problem: &Problem,
) -> Result<LipschitzEstimate> {
    let sampler = config.weight_sampler(problem)?;
    let est_rng = estimation_stream(config.seed);
    let n = config.lipschitz.samples;
    match config.mode.to_run_mode() {
        RunMode::FullBatch => estimate_lipschitz_fullbatch(problem, &sampler, n, &est_rng),
        RunMode::MiniBatch { batch_size } => {
            let train = problem
                .train_set()
                .ok_or_else(|| Error::config("mini-batch estimation needs a dataset problem"))?;
            let mut part_rng =
                RngStream::new(config.seed).fork(LIPSCHITZ_PARTITION_STREAM);
            let batches = partition_batches(train, batch_size, &mut part_rng)?;
            estimate_lipschitz_minibatch(problem, &batches, &sampler, n, &est_rng)
        }
    }
}

/// A finished run: the trace, plus where it landed on disk when the config
/// names an output directory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub name: String,
    pub trace: Trace,
    pub trace_path: Option<PathBuf>,
    pub config_path: Option<PathBuf>,
}

/// Runs one experiment end to end. With `schedule.kind = "derived"` this
/// first estimates the Lipschitz constant (full-dataset gradients in
/// full-batch mode, max-over-batches in mini-batch mode), evaluates the loss
/// at the actual initial weights, derives the constant rate for the run's
/// step horizon, and then trains with it; any other schedule trains
/// directly. The trace (and the resolved config next to it) is written
/// atomically, so a crash never leaves a partial file.
pub fn run_single(config: &ExperimentConfig) -> Result<RunOutput> {
    run_variant(config, 0, sanitize_label(&config.schedule.label()))
}

fn run_variant(config: &ExperimentConfig, variant_index: u64, name: String) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.build_problem()?;
    let mode = config.mode.to_run_mode();
    let steps_per_epoch = mode.steps_per_epoch(&problem)?;
    let total_steps = config
        .epochs
        .checked_mul(steps_per_epoch)
        .ok_or_else(|| Error::config("step count overflows u64"))?;
    let w0 = config.initial_point(&problem)?;
    let base = RngStream::new(config.seed);

    let (schedule, derived_alpha, k_hat) = match &config.schedule {
        ScheduleConfig::Derived {
            delta_sq,
            loss_at_min,
        } => {
            let estimate = estimate_for_config(config, &problem)?;
            let loss_at_init = problem.loss(&w0)?;
            let alpha = derive_step_size(&StepSizeInputs {
                loss_at_init,
                loss_at_min: loss_at_min.unwrap_or(0.0),
                k_hat: estimate.k_hat,
                horizon_t: total_steps,
                delta_sq: *delta_sq,
            })?;
            (
                Schedule::constant(alpha, total_steps),
                Some(alpha),
                Some(estimate.k_hat),
            )
        }
        named => (named.build(total_steps)?, None, None),
    };

    let adam = AdamConfig {
        beta1: config.optimizer.beta1,
        beta2: config.optimizer.beta2,
        rho: config.optimizer.rho,
        schedule,
    };
    let mut train_rng = base.fork(variant_index);
    let mut trace = run_optimizer(&problem, &adam, &w0, config.epochs, mode, &mut train_rng)?;
    trace.header.seed = Some(config.seed);
    trace.header.derived_alpha = derived_alpha;
    trace.header.k_hat = k_hat;
    trace.header.config_hash = Some(config.hash()?);

    let (trace_path, config_path) = match &config.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            let trace_path = dir.join(format!("{name}.csv"));
            let config_path = dir.join(format!("{name}.config.toml"));
            trace.save(&trace_path)?;
            ioutil::atomic_write(&config_path, config.to_toml()?.as_bytes())?;
            (Some(trace_path), Some(config_path))
        }
        None => (None, None),
    };

    Ok(RunOutput {
        name,
        trace,
        trace_path,
        config_path,
    })
}

/// One sweep entry's outcome; failures are recorded, not propagated.
#[derive(Debug)]
pub struct VariantOutcome {
    pub name: String,
    pub outcome: Result<RunOutput>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<VariantOutcome>,
    pub summary: SweepSummary,
    pub summary_path: Option<PathBuf>,
}

/// Runs every `[[sweep]]` variant of the config. All variants share the seed
/// and therefore the initial weights; each gets an isolated training stream
/// keyed by its index, so they may run in parallel. A variant that fails
/// shows up in the summary with its error and the sweep continues.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    if config.sweep.is_empty() {
        return Err(Error::config("sweep needs at least one variant"));
    }
    let runs: Vec<VariantOutcome> = config
        .sweep
        .par_iter()
        .enumerate()
        .map(|(i, variant)| {
            let name = format!("v{i:02}_{}", variant.label());
            let outcome = variant
                .apply(config)
                .and_then(|cfg| run_variant(&cfg, i as u64, name.clone()));
            VariantOutcome { name, outcome }
        })
        .collect();
    let summary = summarize(&runs);
    let summary_path = match &config.out {
        Some(dir) => {
            let path = dir.join("summary.txt");
            ioutil::atomic_write(&path, summary.render().as_bytes())?;
            Some(path)
        }
        None => None,
    };
    Ok(SweepOutcome {
        runs,
        summary,
        summary_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub schedule: String,
    pub derived_alpha: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub final_val_acc: Option<f64>,
    pub diverged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
}

/// Collapses run outcomes into summary rows; a pure function of the traces.
pub fn summarize(runs: &[VariantOutcome]) -> SweepSummary {
    let rows = runs
        .iter()
        .map(|run| match &run.outcome {
            Ok(out) => {
                let last = out.trace.final_row();
                SummaryRow {
                    name: run.name.clone(),
                    schedule: out.trace.header.schedule.clone(),
                    derived_alpha: out.trace.header.derived_alpha,
                    final_train_loss: last.map(|r| r.train_loss),
                    final_grad_norm: last.map(|r| r.grad_norm),
                    final_val_acc: last.and_then(|r| r.val_acc),
                    diverged: out.trace.is_diverged(),
                    error: None,
                }
            }
            Err(e) => SummaryRow {
                name: run.name.clone(),
                schedule: String::new(),
                derived_alpha: None,
                final_train_loss: None,
                final_grad_norm: None,
                final_val_acc: None,
                diverged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    SweepSummary { rows }
}

impl SweepSummary {
    /// Rows ordered by final gradient norm, best first; diverged and failed
    /// runs sort last.
    pub fn ranked_by_grad_norm(&self) -> Vec<&SummaryRow> {
        let mut rows: Vec<&SummaryRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| rank_key(a).partial_cmp(&rank_key(b)).unwrap());
        rows
    }

    /// Rows ordered by final validation accuracy, best first; rows without
    /// one sort last.
    pub fn ranked_by_val_acc(&self) -> Vec<&SummaryRow> {
        let mut rows: Vec<&SummaryRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            let ka = acc_key(a);
            let kb = acc_key(b);
            kb.partial_cmp(&ka).unwrap()
        });
        rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("ranked by final gradient norm (lower is better)\n");
        out.push_str(&format!(
            "{:<4} {:<34} {:>14} {:>14} {:>10}\n",
            "rank", "variant", "grad_norm", "train_loss", "val_acc"
        ));
        for (i, row) in self.ranked_by_grad_norm().iter().enumerate() {
            let status = if let Some(e) = &row.error {
                format!("failed: {e}")
            } else if row.diverged {
                "diverged".to_string()
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{:<4} {:<34} {:>14} {:>14} {:>10} {}\n",
                i + 1,
                row.name,
                fmt_opt(row.final_grad_norm),
                fmt_opt(row.final_train_loss),
                fmt_opt(row.final_val_acc),
                status
            ));
        }
        if self.rows.iter().any(|r| r.final_val_acc.is_some()) {
            out.push_str("\nranked by final validation accuracy (higher is better)\n");
            for (i, row) in self.ranked_by_val_acc().iter().enumerate() {
                out.push_str(&format!(
                    "{:<4} {:<34} {:>10}\n",
                    i + 1,
                    row.name,
                    fmt_opt(row.final_val_acc)
                ));
            }
        }
        out
    }
}

/// Sort key: (status class, value). Clean runs order by their final norm;
/// diverged runs follow, then failures.
fn rank_key(row: &SummaryRow) -> (u8, f64) {
    if row.error.is_some() {
        (2, f64::INFINITY)
    } else if row.diverged || row.final_grad_norm.is_none() {
        (1, row.final_grad_norm.unwrap_or(f64::INFINITY))
    } else {
        (0, row.final_grad_norm.unwrap())
    }
}

fn acc_key(row: &SummaryRow) -> (u8, f64) {
    match row.final_val_acc {
        Some(acc) if row.error.is_none() && !row.diverged => (1, acc),
        Some(acc) => (0, acc),
        None => (0, f64::NEG_INFINITY),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6e}"),
        None => "-".to_string(),
    }
}
