//! The optimizer update.
//!
//! Per coordinate, with gradient `g`:
//!
//! ```text
//! m <- beta1 * m + (1 - beta1) * g
//! v <- beta2 * v + (1 - beta2) * g^2
//! w <- w - alpha_t * m / (sqrt(v) + rho)
//! ```
//!
//! There is *no* bias correction, and the damping term `rho` is added after
//! the square root. Both choices are deliberate and load-bearing: the
//! step-size derivation and the bound checks in [`crate::verify`] assume
//! exactly this update.

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::error::{Error, Result};
use crate::numerics::ParamVector;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_RHO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    /// Denominator damping, added after the square root.
    pub rho: f64,
    pub schedule: Schedule,
}

impl AdamConfig {
    pub fn new(schedule: Schedule) -> Self {
        AdamConfig {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            rho: DEFAULT_RHO,
            schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0 && self.beta1 < 1.0) {
            return Err(Error::config(format!(
                "beta1 = {} must lie in [0, 1)",
                self.beta1
            )));
        }
        if !(self.beta2 >= 0.0 && self.beta2 < 1.0) {
            return Err(Error::config(format!(
                "beta2 = {} must lie in [0, 1)",
                self.beta2
            )));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::config(format!("rho = {} must be positive", self.rho)));
        }
        self.schedule.validate()
    }

    /// Largest damping-relative momentum threshold implied by `beta1`:
    /// the descent analysis wants `beta1 < rho / (rho + gamma)`, i.e.
    /// `rho > beta1 * gamma / (1 - beta1)`. Purely diagnostic; the optimizer
    /// does not enforce it.
    pub fn implied_rho_threshold(beta1: f64, gamma: f64) -> f64 {
        beta1 * gamma / (1.0 - beta1)
    }
}

/// Moment accumulators. `t` counts completed updates; the `t`-th update uses
/// `schedule.at(t)` after incrementing, so the first step queries index 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            t: 0,
        }
    }
}

/// Applies one update in place. Returns the rate `alpha_t` that was used.
///
/// On any error (dimension mismatch, non-finite gradient, schedule range,
/// non-finite result) the state and parameters are left untouched.
pub fn adam_step(
    state: &mut AdamState,
    w: &mut ParamVector,
    g: &ParamVector,
    cfg: &AdamConfig,
) -> Result<f64> {
    let dim = w.len();
    if g.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: g.len(),
            context: "adam_step gradient",
        });
    }
    if state.m.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: state.m.len(),
            context: "adam_step state",
        });
    }
    g.ensure_finite("adam_step gradient")?;

    let t_next = state.t + 1;
    let alpha = cfg.schedule.at(t_next)?;
    let (b1, b2, rho) = (cfg.beta1, cfg.beta2, cfg.rho);

    // compute into fresh buffers so a failed finiteness check leaves
    // everything unchanged
    let mut m_new = state.m.clone();
    let mut v_new = state.v.clone();
    let mut w_new = w.clone();
    {
        let ms = m_new.values_mut();
        let vs = v_new.values_mut();
        let ws = w_new.values_mut();
        let gs = g.values();
        for i in 0..dim {
            let gi = gs[i];
            ms[i] = b1 * ms[i] + (1.0 - b1) * gi;
            vs[i] = b2 * vs[i] + (1.0 - b2) * gi * gi;
            ws[i] -= alpha * ms[i] / (vs[i].sqrt() + rho);
        }
    }
    w_new.ensure_finite("adam_step parameters")?;

    state.m = m_new;
    state.v = v_new;
    state.t = t_next;
    *w = w_new;
    Ok(alpha)
}
