//! The epoch loop: drives [`adam_step`] over a [`Problem`] and records a
//! [`Trace`].
//!
//! Every trace row reports the FULL objective (loss and gradient norm at the
//! epoch-end iterate) even in mini-batch mode, where the updates themselves
//! see only per-batch gradients. In full-batch mode one epoch is exactly one
//! optimizer step and the epoch-end gradient doubles as the next step's
//! input, so an epoch costs a single gradient evaluation.
//!
//! A non-finite loss or gradient anywhere in an epoch stops the run and marks
//! the trace diverged at that epoch; rows for completed epochs are kept.

use crate::data::{partition_batches, GatherScratch, Problem};
use crate::error::{Error, Result};
use crate::harness::{Trace, TraceHeader, TraceRow};
use crate::numerics::{ParamVector, RngStream};
use crate::optim::adam::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    FullBatch,
    MiniBatch { batch_size: usize },
}

impl RunMode {
    pub fn describe(&self) -> String {
        match self {
            RunMode::FullBatch => "full_batch".to_string(),
            RunMode::MiniBatch { batch_size } => format!("mini_batch({batch_size})"),
        }
    }

    /// Optimizer steps per epoch: 1 for full-batch, the number of partition
    /// slices for mini-batch.
    pub fn steps_per_epoch(&self, problem: &Problem) -> Result<u64> {
        match self {
            RunMode::FullBatch => Ok(1),
            RunMode::MiniBatch { batch_size } => {
                if *batch_size == 0 {
                    return Err(Error::config("batch size must be at least 1"));
                }
                let n = problem.data_len().ok_or_else(|| {
                    Error::config(format!(
                        "mini-batch mode needs a dataset problem, got {}",
                        problem.kind_name()
                    ))
                })?;
                Ok(n.div_ceil(*batch_size) as u64)
            }
        }
    }
}

/// Outcome of one fallible stage inside an epoch: numerical failures turn
/// into divergence, everything else propagates.
macro_rules! try_epoch {
    ($expr:expr, $diverged:ident, $epoch:ident, $label:lifetime) => {
        match $expr {
            Ok(value) => value,
            Err(Error::Numerical(_)) => {
                $diverged = Some($epoch);
                break $label;
            }
            Err(e) => return Err(e),
        }
    };
}

/// Runs `epochs` epochs of the configured optimizer from `w0`.
///
/// The schedule inside `cfg` must cover exactly the run's step count
/// (`epochs` in full-batch mode, `epochs * ceil(n / batch_size)` otherwise).
/// `rng` seeds the per-epoch batch shuffles; full-batch runs never consume
/// it, and neither does a mini-batch run whose batch covers the dataset, so
/// that degenerate case reproduces the full-batch trace bit for bit.
pub fn run_optimizer(
    problem: &Problem,
    cfg: &AdamConfig,
    w0: &ParamVector,
    epochs: u64,
    mode: RunMode,
    rng: &mut RngStream,
) -> Result<Trace> {
    cfg.validate()?;
    if epochs == 0 {
        return Err(Error::config("epochs must be at least 1"));
    }
    let steps_per_epoch = mode.steps_per_epoch(problem)?;
    let total_steps = epochs
        .checked_mul(steps_per_epoch)
        .ok_or_else(|| Error::config("step count overflows u64"))?;
    if cfg.schedule.total() != total_steps {
        return Err(Error::config(format!(
            "schedule horizon {} does not match the run's {total_steps} steps \
             ({epochs} epochs x {steps_per_epoch} per epoch)",
            cfg.schedule.total()
        )));
    }

    let mut w = w0.clone();
    let (loss0, g0) = problem.loss_and_grad(&w)?;
    if !(loss0.is_finite() && g0.l2_norm().is_finite()) {
        return Err(Error::numerical(
            "loss or gradient norm non-finite at the initial point",
        ));
    }
    let header = TraceHeader {
        problem: problem.kind_name().to_string(),
        schedule: cfg.schedule.describe(),
        mode: mode.describe(),
        epochs,
        steps_per_epoch,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        rho: cfg.rho,
        loss0,
        grad_norm0: g0.l2_norm(),
        seed: None,
        derived_alpha: None,
        k_hat: None,
        config_hash: None,
    };

    let mut state = AdamState::new(w.len());
    let mut rows = Vec::with_capacity(epochs as usize);
    let mut diverged_at = None;
    let mut scratch = GatherScratch::default();
    // full-batch mode: gradient at the current iterate, reused as the next
    // step's input
    let mut carried_grad = Some(g0);

    'run: for epoch in 1..=epochs {
        let mut lr = 0.0;
        match mode {
            RunMode::FullBatch => {
                let g = carried_grad.take().expect("full-batch carries a gradient");
                lr = try_epoch!(adam_step(&mut state, &mut w, &g, cfg), diverged_at, epoch, 'run);
            }
            RunMode::MiniBatch { batch_size } => {
                let train = problem.train_set().expect("mode requires a dataset");
                let parts = partition_batches(train, batch_size, rng)?;
                for part in &parts {
                    let (_, g) = try_epoch!(
                        problem.loss_and_grad_batch(&w, part, &mut scratch),
                        diverged_at,
                        epoch,
                        'run
                    );
                    lr = try_epoch!(adam_step(&mut state, &mut w, &g, cfg), diverged_at, epoch, 'run);
                }
            }
        }

        let (train_loss, g) =
            try_epoch!(problem.loss_and_grad(&w), diverged_at, epoch, 'run);
        let (val_loss, val_acc) = match try_epoch!(
            problem.evaluate_validation(&w),
            diverged_at,
            epoch,
            'run
        ) {
            Some((l, a)) => (Some(l), Some(a)),
            None => (None, None),
        };
        let grad_norm = g.l2_norm();
        // entries can stay finite while the squared norm (or the loss one
        // step later) overflows; a non-finite record is divergence, not data
        let finite = train_loss.is_finite()
            && grad_norm.is_finite()
            && val_loss.map_or(true, f64::is_finite)
            && val_acc.map_or(true, f64::is_finite);
        if !finite {
            diverged_at = Some(epoch);
            break 'run;
        }
        rows.push(TraceRow {
            epoch,
            lr,
            train_loss,
            grad_norm,
            val_loss,
            val_acc,
        });
        if mode == RunMode::FullBatch {
            carried_grad = Some(g);
        }
    }

    let trace = Trace {
        header,
        rows,
        diverged_at,
    };
    trace.validate()?;
    Ok(trace)
}
