//! Shared numeric plumbing: flat `f64` parameter vectors, a seeded RNG
//! stream, and the dense kernels used by the model code.
//!
//! Everything here is deterministic: identical inputs (and for [`RngStream`],
//! identical seed and call sequence) produce identical bits regardless of
//! thread count. The kernels in [`linalg`] keep summation order fixed for the
//! same reason.

pub(crate) mod linalg;
mod rng;

pub use rng::RngStream;

use crate::error::{Error, Result};

/// Flat parameter vector. Every entry is finite; constructors reject NaN and
/// infinities, and operations that could produce them surface errors instead.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Builds a vector, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite entry {} at index {i}",
                values[i]
            )));
        }
        Ok(ParamVector { values })
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Internal mutable access. Callers are responsible for re-establishing
    /// the all-finite invariant before the vector crosses a public boundary.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Checks the all-finite invariant, naming the first offending index.
    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "{context}: non-finite value {} at index {i}",
                self.values[i]
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
                context: "dot",
            });
        }
        Ok(linalg::dot_slices(&self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        linalg::dot_slices(&self.values, &self.values).sqrt()
    }
}

/// Central-difference gradient of `f` at `w` with step `h`.
///
/// This is the independent check used against analytic gradients: it only
/// ever evaluates `f`, so it shares no code with any backward pass. Errors if
/// `h <= 0` or if `f` returns a non-finite value at a probe point.
pub fn finite_difference_gradient<F>(mut f: F, w: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: FnMut(&ParamVector) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("finite-difference step h={h} must be positive")));
    }
    let mut probe = w.clone();
    let mut grad = vec![0.0; w.len()];
    for i in 0..w.len() {
        let orig = probe.values[i];
        probe.values[i] = orig + h;
        let fp = f(&probe);
        probe.values[i] = orig - h;
        let fm = f(&probe);
        probe.values[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::numerical(format!(
                "finite-difference probe at coordinate {i} returned a non-finite loss"
            )));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    ParamVector::new(grad)
}
