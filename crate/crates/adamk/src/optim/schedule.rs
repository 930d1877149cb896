//! Learning-rate schedules.
//!
//! `schedule_at(t)` maps a step index `t in [0, total]` to a positive rate;
//! the runner queries index `t` after `t` optimizer steps, so the first
//! update uses `schedule_at(1)` and `schedule_at(0)` is the initial rate.
//! Querying past `total` is a range error rather than silent extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default initial rate shared by the decaying schedules.
pub const DEFAULT_ALPHA0: f64 = 1e-2;
/// Default horizon (optimizer steps).
pub const DEFAULT_TOTAL: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `alpha0` at every step.
    Constant { alpha0: f64, total: u64 },
    /// Warmup recurrence with constant ratio:
    /// `a_t = a_{t-1} * (1 + (ef - sf) / (sf + ef * (total - 1)))`.
    /// With the default `sf = 0.1 < ef = 1` the rate grows geometrically.
    Linear {
        alpha0: f64,
        total: u64,
        start_factor: f64,
        end_factor: f64,
    },
    /// Piecewise constant: `alpha0` for `t < m1`, `alpha0/10` for
    /// `m1 <= t <= m2`, `alpha0/100` for `t > m2`.
    StepLr {
        alpha0: f64,
        total: u64,
        milestones: (u64, u64),
    },
    /// Two-phase cosine cycle: up from `alpha0/div_factor` to `alpha0` over
    /// `round(pct_up * total)` steps, then down to
    /// `alpha0 / (div_factor * final_div)`.
    OneCycle {
        alpha0: f64,
        total: u64,
        pct_up: f64,
        div_factor: f64,
        final_div: f64,
    },
    /// `alpha0 / sqrt(t)`, with `t = 0` mapping to `alpha0` (the closed form
    /// is singular there and the runner never queries 0 for an update).
    SqrtDecay { alpha0: f64, total: u64 },
    /// `alpha0 / (1 + alpha0 * t)`.
    InverseTime { alpha0: f64, total: u64 },
    /// `alpha_min + 0.5 * (alpha0 - alpha_min) * (1 + cos(pi * t / total))`.
    Cosine {
        alpha0: f64,
        total: u64,
        alpha_min: f64,
    },
    /// `alpha0 * exp(-decay_rate * t)`.
    Exponential {
        alpha0: f64,
        total: u64,
        decay_rate: f64,
    },
    /// Constant `alpha0 / sqrt(total)`: the horizon-scaled baseline.
    ConstOverSqrtT { alpha0: f64, total: u64 },
}

impl Schedule {
    pub fn constant(alpha0: f64, total: u64) -> Self {
        Schedule::Constant { alpha0, total }
    }

    pub fn linear(alpha0: f64, total: u64) -> Self {
        Schedule::Linear {
            alpha0,
            total,
            start_factor: 0.1,
            end_factor: 1.0,
        }
    }

    pub fn step_lr(alpha0: f64, total: u64) -> Self {
        Schedule::StepLr {
            alpha0,
            total,
            milestones: (40, 80),
        }
    }

    pub fn one_cycle(alpha0: f64, total: u64) -> Self {
        Schedule::OneCycle {
            alpha0,
            total,
            pct_up: 0.3,
            div_factor: 25.0,
            final_div: 1e4,
        }
    }

    pub fn cosine(alpha0: f64, total: u64) -> Self {
        Schedule::Cosine {
            alpha0,
            total,
            alpha_min: 1e-3,
        }
    }

    pub fn exponential(alpha0: f64, total: u64) -> Self {
        Schedule::Exponential {
            alpha0,
            total,
            decay_rate: 1e-3,
        }
    }

    pub fn total(&self) -> u64 {
        match *self {
            Schedule::Constant { total, .. }
            | Schedule::Linear { total, .. }
            | Schedule::StepLr { total, .. }
            | Schedule::OneCycle { total, .. }
            | Schedule::SqrtDecay { total, .. }
            | Schedule::InverseTime { total, .. }
            | Schedule::Cosine { total, .. }
            | Schedule::Exponential { total, .. }
            | Schedule::ConstOverSqrtT { total, .. } => total,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Schedule::Constant { .. } => "constant",
            Schedule::Linear { .. } => "linear",
            Schedule::StepLr { .. } => "step_lr",
            Schedule::OneCycle { .. } => "one_cycle",
            Schedule::SqrtDecay { .. } => "sqrt_decay",
            Schedule::InverseTime { .. } => "inverse_time",
            Schedule::Cosine { .. } => "cosine",
            Schedule::Exponential { .. } => "exponential",
            Schedule::ConstOverSqrtT { .. } => "const_over_sqrt_t",
        }
    }

    /// Compact human-readable form for trace headers and summaries. Floats
    /// use `{:?}`, which picks scientific notation when it is the shorter
    /// round-trip form (a plain `{}` would expand 1e76 to 77 digits).
    pub fn describe(&self) -> String {
        match *self {
            Schedule::Constant { alpha0, .. } => format!("constant({alpha0:?})"),
            Schedule::Linear {
                alpha0,
                start_factor,
                end_factor,
                ..
            } => format!("linear(a0={alpha0:?},sf={start_factor:?},ef={end_factor:?})"),
            Schedule::StepLr { alpha0, milestones, .. } => {
                format!("step_lr(a0={alpha0:?},m={},{})", milestones.0, milestones.1)
            }
            Schedule::OneCycle {
                alpha0,
                pct_up,
                div_factor,
                final_div,
                ..
            } => format!(
                "one_cycle(max={alpha0:?},pct_up={pct_up:?},div={div_factor:?},final_div={final_div:?})"
            ),
            Schedule::SqrtDecay { alpha0, .. } => format!("sqrt_decay(a0={alpha0:?})"),
            Schedule::InverseTime { alpha0, .. } => format!("inverse_time(a0={alpha0:?})"),
            Schedule::Cosine { alpha0, alpha_min, .. } => {
                format!("cosine(a0={alpha0:?},min={alpha_min:?})")
            }
            Schedule::Exponential { alpha0, decay_rate, .. } => {
                format!("exponential(a0={alpha0:?},k={decay_rate:?})")
            }
            Schedule::ConstOverSqrtT { alpha0, total } => {
                format!("const_over_sqrt_t(a0={alpha0:?},T={total})")
            }
        }
    }

    /// The constant rate, when the schedule is constant in `t`.
    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            Schedule::Constant { alpha0, .. } => Some(alpha0),
            Schedule::ConstOverSqrtT { alpha0, total } => Some(alpha0 / (total as f64).sqrt()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let check_alpha0 = |a: f64| -> Result<()> {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("schedule alpha0 = {a} must be positive and finite"));
            }
            Ok(())
        };
        if self.total() == 0 {
            return bad("schedule total (horizon) must be at least 1".into());
        }
        match *self {
            Schedule::Constant { alpha0, .. }
            | Schedule::SqrtDecay { alpha0, .. }
            | Schedule::InverseTime { alpha0, .. }
            | Schedule::ConstOverSqrtT { alpha0, .. } => check_alpha0(alpha0),
            Schedule::Linear {
                alpha0,
                total,
                start_factor,
                end_factor,
            } => {
                check_alpha0(alpha0)?;
                if !(start_factor > 0.0 && end_factor > 0.0) {
                    return bad(format!(
                        "linear schedule factors must be positive (sf={start_factor}, ef={end_factor})"
                    ));
                }
                // ratio denominator sf + ef*(T-1) is positive whenever the
                // factors are; growth below -100% would cross zero
                let ratio = 1.0 + (end_factor - start_factor) / (start_factor + end_factor * (total as f64 - 1.0));
                if !(ratio > 0.0) {
                    return bad(format!("linear schedule ratio {ratio} must be positive"));
                }
                Ok(())
            }
            Schedule::StepLr { alpha0, total, milestones } => {
                check_alpha0(alpha0)?;
                if milestones.0 > milestones.1 || milestones.1 > total {
                    return bad(format!(
                        "step_lr milestones {:?} must be ordered and within total {total}",
                        milestones
                    ));
                }
                Ok(())
            }
            Schedule::OneCycle {
                alpha0,
                pct_up,
                div_factor,
                final_div,
                total,
            } => {
                check_alpha0(alpha0)?;
                if !(pct_up > 0.0 && pct_up < 1.0) {
                    return bad(format!("one_cycle pct_up = {pct_up} must be in (0, 1)"));
                }
                if !(div_factor > 1.0 && final_div >= 1.0) {
                    return bad(format!(
                        "one_cycle div_factor = {div_factor} must exceed 1 and final_div = {final_div} be at least 1"
                    ));
                }
                let up = (pct_up * total as f64).round() as u64;
                if up == 0 || up >= total {
                    return bad(format!(
                        "one_cycle with total {total} leaves no steps for one of its phases"
                    ));
                }
                Ok(())
            }
            Schedule::Cosine { alpha0, alpha_min, .. } => {
                check_alpha0(alpha0)?;
                if !(alpha_min > 0.0 && alpha_min <= alpha0) {
                    return bad(format!(
                        "cosine alpha_min = {alpha_min} must be in (0, alpha0 = {alpha0}]"
                    ));
                }
                Ok(())
            }
            Schedule::Exponential { alpha0, decay_rate, .. } => {
                check_alpha0(alpha0)?;
                if !(decay_rate >= 0.0 && decay_rate.is_finite()) {
                    return bad(format!("exponential decay_rate = {decay_rate} must be non-negative"));
                }
                Ok(())
            }
        }
    }

    /// Rate at step `t`. `t` past the horizon is a range error.
    pub fn at(&self, t: u64) -> Result<f64> {
        let total = self.total();
        if t > total {
            return Err(Error::config(format!(
                "schedule index t = {t} out of range (total = {total})"
            )));
        }
        let tf = t as f64;
        let value = match *self {
            Schedule::Constant { alpha0, .. } => alpha0,
            Schedule::Linear {
                alpha0,
                total,
                start_factor,
                end_factor,
            } => {
                let ratio =
                    1.0 + (end_factor - start_factor) / (start_factor + end_factor * (total as f64 - 1.0));
                let mut a = alpha0;
                for _ in 0..t {
                    a *= ratio;
                }
                a
            }
            Schedule::StepLr { alpha0, milestones, .. } => {
                if t < milestones.0 {
                    alpha0
                } else if t <= milestones.1 {
                    alpha0 / 10.0
                } else {
                    alpha0 / 100.0
                }
            }
            Schedule::OneCycle {
                alpha0,
                total,
                pct_up,
                div_factor,
                final_div,
            } => {
                let up = (pct_up * total as f64).round();
                let initial = alpha0 / div_factor;
                let floor = initial / final_div;
                if tf <= up {
                    cosine_anneal(initial, alpha0, tf / up)
                } else {
                    cosine_anneal(alpha0, floor, (tf - up) / (total as f64 - up))
                }
            }
            Schedule::SqrtDecay { alpha0, .. } => alpha0 / tf.max(1.0).sqrt(),
            Schedule::InverseTime { alpha0, .. } => alpha0 / (1.0 + alpha0 * tf),
            Schedule::Cosine {
                alpha0,
                total,
                alpha_min,
            } => {
                alpha_min
                    + 0.5 * (alpha0 - alpha_min) * (1.0 + (std::f64::consts::PI * tf / total as f64).cos())
            }
            Schedule::Exponential { alpha0, decay_rate, .. } => alpha0 * (-decay_rate * tf).exp(),
            Schedule::ConstOverSqrtT { alpha0, total } => alpha0 / (total as f64).sqrt(),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::numerical(format!(
                "schedule {} produced non-positive rate {value} at t = {t}",
                self.kind()
            )));
        }
        Ok(value)
    }
}

/// Cosine interpolation from `start` (at `pct = 0`) to `end` (at `pct = 1`).
fn cosine_anneal(start: f64, end: f64, pct: f64) -> f64 {
    end + (start - end) / 2.0 * (1.0 + (std::f64::consts::PI * pct).cos())
}
