//! Adam with a derived constant step size.
//!
//! The library implements the full experimental loop around one idea: if the
//! gradient of the training loss is bounded by a constant `K` that can be
//! estimated by sampling, then a *constant* Adam step size of the form
//! `alpha = sqrt(2 * (L(w0) - L*) / (K * delta^2 * T))` comes with a
//! gradient-norm guarantee after `T` steps, and in practice competes with
//! hand-tuned schedules. The crate provides:
//!
//! - [`optim`]: the optimizer (first/second moment accumulators, *no* bias
//!   correction, damping added after the square root), the learning-rate
//!   schedules it is compared against, and the epoch runner;
//! - [`lipschitz`]: max-of-sampled-gradient-norms estimation of `K`, the
//!   step-size derivation, and the runtime threshold for a target accuracy;
//! - [`models`]: a plain ReLU MLP with softmax cross-entropy and exact
//!   backprop, plus the five initialization schemes used by the estimator;
//! - [`data`]: IDX image/label files (gzip-transparent), balanced subset
//!   construction, batch partitioning, a deterministic synthetic digit
//!   corpus, and the synthetic benchmark problems;
//! - [`harness`]: config files, trace recording, single runs and
//!   schedule sweeps with shared initialization;
//! - [`verify`]: numerical checks of the convergence bound, the descent
//!   inner-product inequality, and estimator convergence probes.
//!
//! Everything is `f64` and deterministic: a config plus a seed reproduces a
//! run bit for bit, independent of thread count.

pub mod data;
pub mod error;
pub mod harness;
mod ioutil;
pub mod lipschitz;
pub mod models;
pub mod numerics;
pub mod optim;
pub mod verify;

pub use error::{Error, Result};
