//! Sampled estimation of the loss gradient's Lipschitz constant and the
//! constant step size derived from it.
//!
//! The estimator draws `n` weight vectors from a [`WeightSampler`], evaluates
//! the gradient norm at each, and reports the running maximum `K̂`. That max
//! converges to the true Lipschitz constant over the sampling support only
//! under the assumption that the sampled norms are i.i.d. with bounded
//! support; heavy-tailed losses are not detected, so the estimate is a lower
//! bound in general. Callers that need certainty should compare against
//! [`WeightSampler::support_gradient_sup`] where a closed-form bound exists.
//!
//! Sample `i` always consumes the child stream `rng.fork(i)`, so estimates
//! are deterministic for a fixed seed regardless of thread count, and
//! growing `n` extends the sample set instead of reshuffling it. That makes
//! `K̂` non-decreasing in `n` for a fixed seed.

use rayon::prelude::*;

use crate::data::{GatherScratch, Problem, WeightSampler};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Sample count used when a run does not specify one.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Result of a gradient-norm sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    /// Max of `per_sample_norms`; the estimated Lipschitz constant.
    pub k_hat: f64,
    /// Number of samples requested (valid + skipped).
    pub n_samples: usize,
    /// Gradient norms of the valid samples, in sample-index order.
    pub per_sample_norms: Vec<f64>,
    /// Samples whose gradient (or its norm) was non-finite.
    pub skipped: usize,
    /// Sampler identifier, e.g. `init:kaiming_uniform`.
    pub sampler: String,
    /// Base seed of the stream the samples were forked from.
    pub seed: u64,
}

impl LipschitzEstimate {
    fn from_norms(
        norms: Vec<f64>,
        n: usize,
        skipped: usize,
        sampler: &WeightSampler,
        seed: u64,
    ) -> Result<Self> {
        if norms.is_empty() {
            return Err(Error::numerical(format!(
                "all {n} sampled gradients were non-finite; cannot estimate a Lipschitz constant"
            )));
        }
        let k_hat = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(LipschitzEstimate {
            k_hat,
            n_samples: n,
            per_sample_norms: norms,
            skipped,
            sampler: sampler.name(),
            seed,
        })
    }
}

/// Estimate the Lipschitz constant from full-dataset gradients: `K̂ = max_i
/// ‖∇L(w_i)‖₂` over `n` weights drawn from `sampler`.
///
/// Samples with a non-finite gradient are skipped and counted in
/// [`LipschitzEstimate::skipped`]; if every sample is non-finite the
/// estimation fails.
pub fn estimate_lipschitz_fullbatch(
    problem: &Problem,
    sampler: &WeightSampler,
    n: usize,
    rng: &RngStream,
) -> Result<LipschitzEstimate> {
    check_sampling_inputs(problem, sampler, n)?;
    let results: Vec<Result<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut child = rng.fork(i as u64);
            let w = sampler.sample(problem, &mut child)?;
            match problem.loss_and_grad(&w) {
                Ok((_, g)) => Ok(finite_norm(g.l2_norm())),
                Err(Error::Numerical(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let (norms, skipped) = split_valid(results)?;
    LipschitzEstimate::from_norms(norms, n, skipped, sampler, rng.seed())
}

/// Mini-batch variant: for each sampled weight vector the gradient norm is
/// the *maximum* over `batches` of the per-batch gradient norm, which
/// dominates the full-batch norm (the full gradient is an average of batch
/// gradients). `K̂` is the max of those inner maxima.
///
/// With a single batch covering the whole dataset this reduces bit-exactly
/// to [`estimate_lipschitz_fullbatch`].
pub fn estimate_lipschitz_minibatch(
    problem: &Problem,
    batches: &[Vec<usize>],
    sampler: &WeightSampler,
    n: usize,
    rng: &RngStream,
) -> Result<LipschitzEstimate> {
    check_sampling_inputs(problem, sampler, n)?;
    if batches.is_empty() {
        return Err(Error::config("mini-batch estimation needs at least one batch"));
    }
    let results: Vec<Result<Option<f64>>> = (0..n)
        .into_par_iter()
        .map_init(GatherScratch::default, |scratch, i| {
            let mut child = rng.fork(i as u64);
            let w = sampler.sample(problem, &mut child)?;
            let mut worst: Option<f64> = None;
            for idx in batches {
                match problem.loss_and_grad_batch(&w, idx, scratch) {
                    Ok((_, g)) => {
                        if let Some(norm) = finite_norm(g.l2_norm()) {
                            worst = Some(worst.map_or(norm, |m| m.max(norm)));
                        } else {
                            return Ok(None);
                        }
                    }
                    Err(Error::Numerical(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(worst)
        })
        .collect();
    let (norms, skipped) = split_valid(results)?;
    LipschitzEstimate::from_norms(norms, n, skipped, sampler, rng.seed())
}

fn check_sampling_inputs(problem: &Problem, sampler: &WeightSampler, n: usize) -> Result<()> {
    sampler.validate(problem)?;
    if n == 0 {
        return Err(Error::config("sample count must be at least 1"));
    }
    Ok(())
}

fn finite_norm(norm: f64) -> Option<f64> {
    // entries can be finite while the sum of squares overflows, so the norm
    // itself needs the check
    norm.is_finite().then_some(norm)
}

fn split_valid(results: Vec<Result<Option<f64>>>) -> Result<(Vec<f64>, usize)> {
    let mut norms = Vec::with_capacity(results.len());
    let mut skipped = 0usize;
    for r in results {
        match r? {
            Some(x) => norms.push(x),
            None => skipped += 1,
        }
    }
    Ok((norms, skipped))
}

/// Inputs for [`derive_step_size`].
///
/// `delta_sq` is exposed for completeness but omitted by default: with the
/// practical damping ρ = 1e-8 and any realistic gradient bound, δ² = γ²/ρ²
/// is astronomically large and would shrink α to a useless value, so the
/// practical recipe drops the term and sets `loss_at_min` to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeInputs {
    /// Loss at the actual training initialization, L(w₀).
    pub loss_at_init: f64,
    /// Loss at the global minimum, L*; zero unless known.
    pub loss_at_min: f64,
    /// Estimated Lipschitz constant K̂.
    pub k_hat: f64,
    /// Number of optimizer steps the constant rate will run for.
    pub horizon_t: u64,
    /// Optional δ² factor; `None` omits it from the denominator.
    pub delta_sq: Option<f64>,
}

impl StepSizeInputs {
    /// The practical configuration: L* = 0 and no δ² term.
    pub fn new(loss_at_init: f64, k_hat: f64, horizon_t: u64) -> Self {
        StepSizeInputs {
            loss_at_init,
            loss_at_min: 0.0,
            k_hat,
            horizon_t,
            delta_sq: None,
        }
    }
}

/// Constant step size α = √(2(L₀ − L*)/(K̂·δ²·T)), with δ² treated as 1 when
/// omitted. The derived α must be positive; L₀ = L* is rejected.
pub fn derive_step_size(inputs: &StepSizeInputs) -> Result<f64> {
    let StepSizeInputs {
        loss_at_init,
        loss_at_min,
        k_hat,
        horizon_t,
        delta_sq,
    } = *inputs;
    if !loss_at_init.is_finite() || !loss_at_min.is_finite() {
        return Err(Error::config(format!(
            "losses must be finite, got L0={loss_at_init}, Lmin={loss_at_min}"
        )));
    }
    if loss_at_min < 0.0 {
        return Err(Error::config(format!(
            "loss at the minimum must be non-negative, got {loss_at_min}"
        )));
    }
    if loss_at_init < loss_at_min {
        return Err(Error::config(format!(
            "initial loss {loss_at_init} is below the minimum loss {loss_at_min}"
        )));
    }
    if !(k_hat.is_finite() && k_hat > 0.0) {
        return Err(Error::config(format!(
            "estimated Lipschitz constant must be positive, got {k_hat}"
        )));
    }
    if horizon_t == 0 {
        return Err(Error::config("step horizon T must be at least 1"));
    }
    let delta_sq = match delta_sq {
        Some(d) if !(d.is_finite() && d > 0.0) => {
            return Err(Error::config(format!("delta_sq must be positive, got {d}")));
        }
        Some(d) => d,
        None => 1.0,
    };
    let alpha =
        (2.0 * (loss_at_init - loss_at_min) / (k_hat * delta_sq * horizon_t as f64)).sqrt();
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!(
            "derived step size {alpha} is not positive; initial loss must exceed the minimum loss"
        )));
    }
    Ok(alpha)
}

/// Smallest integer T with T ≥ 2·K·δ²·ΔL/ε⁴: the horizon beyond which the
/// constant-rate gradient-norm guarantee reaches accuracy ε.
pub fn runtime_threshold(epsilon: f64, k: f64, delta_sq: f64, delta_loss: f64) -> Result<u64> {
    for (name, v) in [
        ("epsilon", epsilon),
        ("K", k),
        ("delta_sq", delta_sq),
        ("delta_loss", delta_loss),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(format!("{name} must be positive, got {v}")));
        }
    }
    let t = (2.0 * k * delta_sq * delta_loss / epsilon.powi(4)).ceil();
    if !t.is_finite() || t >= u64::MAX as f64 {
        return Err(Error::config(format!(
            "runtime threshold 2*K*delta_sq*delta_loss/epsilon^4 = {t} exceeds the supported range"
        )));
    }
    Ok((t as u64).max(1))
}
