//! Per-run training records and their CSV form.
//!
//! A trace is one CSV file: `#`-prefixed metadata lines, then the exact
//! column header `epoch,lr,train_loss,grad_norm,val_loss,val_acc`, then one
//! row per completed epoch. `grad_norm` is always the full-batch gradient
//! norm at the epoch-end iterate; the header additionally records the loss
//! and gradient norm at the initial point, so the whole iterate sequence
//! `w_0..w_T` is covered. Floats are written in shortest round-trip form:
//! parsing a written trace reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ioutil;

pub const CSV_COLUMNS: &str = "epoch,lr,train_loss,grad_norm,val_loss,val_acc";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub problem: String,
    pub schedule: String,
    /// "full_batch" or "mini_batch(size)"
    pub mode: String,
    pub epochs: u64,
    pub steps_per_epoch: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    /// loss at w_0
    pub loss0: f64,
    /// full-batch gradient norm at w_0
    pub grad_norm0: f64,
    pub seed: Option<u64>,
    pub derived_alpha: Option<f64>,
    pub k_hat: Option<f64>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: u64,
    /// In mini-batch mode, the step size of the epoch's last update.
    pub lr: f64,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub rows: Vec<TraceRow>,
    /// Epoch at which the loss went non-finite; rows stop just before it.
    pub diverged_at: Option<u64>,
}

impl Trace {
    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Minimum gradient norm over the first `count` iterates w_0, w_1, ...
    /// (the initial point counts as the first).
    pub fn min_grad_norm_over_first(&self, count: u64) -> Option<f64> {
        if count == 0 {
            return None;
        }
        let mut best = self.header.grad_norm0;
        for row in self.rows.iter().take_while(|r| r.epoch < count) {
            best = best.min(row.grad_norm);
        }
        Some(best)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0u64;
        for row in &self.rows {
            if row.epoch <= prev {
                return Err(Error::data(format!(
                    "trace rows not strictly increasing: epoch {} after {prev}",
                    row.epoch
                )));
            }
            prev = row.epoch;
            let finite = row.lr.is_finite()
                && row.train_loss.is_finite()
                && row.grad_norm.is_finite()
                && row.val_loss.map_or(true, f64::is_finite)
                && row.val_acc.map_or(true, f64::is_finite);
            if !finite {
                return Err(Error::data(format!(
                    "trace row {} holds a non-finite value",
                    row.epoch
                )));
            }
        }
        if let Some(at) = self.diverged_at {
            if prev >= at {
                return Err(Error::data(format!(
                    "divergence at epoch {at} but rows continue to {prev}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let mut meta = |key: &str, value: String| {
            writeln!(out, "# {key}: {value}").expect("string write");
        };
        meta("problem", h.problem.clone());
        meta("schedule", h.schedule.clone());
        meta("mode", h.mode.clone());
        meta("epochs", h.epochs.to_string());
        meta("steps_per_epoch", h.steps_per_epoch.to_string());
        meta("beta1", h.beta1.to_string());
        meta("beta2", h.beta2.to_string());
        meta("rho", h.rho.to_string());
        meta("loss0", h.loss0.to_string());
        meta("grad_norm0", h.grad_norm0.to_string());
        if let Some(seed) = h.seed {
            meta("seed", seed.to_string());
        }
        if let Some(a) = h.derived_alpha {
            meta("derived_alpha", a.to_string());
        }
        if let Some(k) = h.k_hat {
            meta("k_hat", k.to_string());
        }
        if let Some(hash) = &h.config_hash {
            meta("config_hash", hash.clone());
        }
        if let Some(at) = self.diverged_at {
            meta("diverged_at", at.to_string());
        }
        out.push_str(CSV_COLUMNS);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.grad_norm,
                opt(r.val_loss),
                opt(r.val_acc)
            )
            .expect("string write");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        ioutil::atomic_write(path, self.to_csv().as_bytes())
    }

    pub fn parse_csv(text: &str) -> Result<Trace> {
        let bad = |line: usize, what: String| Error::data(format!("trace line {line}: {what}"));

        let mut meta: Vec<(String, String)> = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let Some(rest) = line.strip_prefix('#') else { break };
            let (n, _) = lines.next().expect("peeked");
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| bad(n + 1, "metadata without ':'".into()))?;
            meta.push((key.trim().to_string(), value.trim().to_string()));
        }

        match lines.next() {
            Some((_, cols)) if cols == CSV_COLUMNS => {}
            Some((n, cols)) => {
                return Err(bad(n + 1, format!("column header {cols:?}, expected {CSV_COLUMNS:?}")))
            }
            None => return Err(Error::data("trace has no column header")),
        }

        let mut take = |key: &str| -> Option<String> {
            let pos = meta.iter().position(|(k, _)| k == key)?;
            Some(meta.remove(pos).1)
        };
        let required = |key: &str, v: Option<String>| {
            v.ok_or_else(|| Error::data(format!("trace metadata missing {key}")))
        };
        fn num<T: std::str::FromStr>(key: &str, s: String) -> Result<T> {
            s.parse()
                .map_err(|_| Error::data(format!("trace metadata {key}: bad value {s:?}")))
        }
        let f = |key: &str, v: Option<String>| -> Result<f64> { num(key, required(key, v)?) };
        let u = |key: &str, v: Option<String>| -> Result<u64> { num(key, required(key, v)?) };

        let header = TraceHeader {
            problem: required("problem", take("problem"))?,
            schedule: required("schedule", take("schedule"))?,
            mode: required("mode", take("mode"))?,
            epochs: u("epochs", take("epochs"))?,
            steps_per_epoch: u("steps_per_epoch", take("steps_per_epoch"))?,
            beta1: f("beta1", take("beta1"))?,
            beta2: f("beta2", take("beta2"))?,
            rho: f("rho", take("rho"))?,
            loss0: f("loss0", take("loss0"))?,
            grad_norm0: f("grad_norm0", take("grad_norm0"))?,
            seed: take("seed").map(|s| num("seed", s)).transpose()?,
            derived_alpha: take("derived_alpha").map(|s| num("derived_alpha", s)).transpose()?,
            k_hat: take("k_hat").map(|s| num("k_hat", s)).transpose()?,
            config_hash: take("config_hash"),
        };
        let diverged_at = take("diverged_at").map(|s| num("diverged_at", s)).transpose()?;
        if let Some((key, _)) = meta.first() {
            return Err(Error::data(format!("trace metadata has unknown key {key:?}")));
        }

        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad(n + 1, format!("{} fields, expected 6", fields.len())));
            }
            let cell = |i: usize, name: &str| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| bad(n + 1, format!("bad {name} {:?}", fields[i])))
            };
            let opt_cell = |i: usize, name: &str| -> Result<Option<f64>> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    cell(i, name).map(Some)
                }
            };
            rows.push(TraceRow {
                epoch: fields[0]
                    .parse()
                    .map_err(|_| bad(n + 1, format!("bad epoch {:?}", fields[0])))?,
                lr: cell(1, "lr")?,
                train_loss: cell(2, "train_loss")?,
                grad_norm: cell(3, "grad_norm")?,
                val_loss: opt_cell(4, "val_loss")?,
                val_acc: opt_cell(5, "val_acc")?,
            });
        }

        let trace = Trace {
            header,
            rows,
            diverged_at,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn load(path: &Path) -> Result<Trace> {
        let bytes = ioutil::read_bytes(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::data(format!("{}: trace is not utf-8", path.display())))?;
        Trace::parse_csv(&text)
    }
}
