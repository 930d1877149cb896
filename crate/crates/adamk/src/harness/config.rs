//! Experiment configuration: one TOML file describes a run end to end.
//!
//! Unknown keys are rejected everywhere, so a typo in a scheduler parameter
//! fails loudly instead of silently using a default. A minimal config:
//!
//! ```toml
//! seed = 7
//! epochs = 100
//!
//! [problem]
//! kind = "mlp"
//! hidden_width = 300
//!
//! [problem.data]
//! source = "synthetic"
//!
//! [schedule]
//! kind = "derived"
//! ```
//!
//! plus optional `[optimizer]`, `[mode]`, `[lipschitz]` sections and
//! `[[sweep]]` variant tables; every omitted field takes the defaults
//! documented on its struct.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, BoxBounds, Problem, WeightSampler};
use crate::error::{Error, Result};
use crate::lipschitz;
use crate::models::{self, InitScheme, MlpSpec};
use crate::numerics::{ParamVector, RngStream};
use crate::optim::{RunMode, Schedule, DEFAULT_ALPHA0, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_RHO};

/// Corpus seed used when a synthetic data section does not pin one. Fixed
/// independently of the experiment seed so reruns with different training
/// seeds still see identical data.
pub const DEFAULT_CORPUS_SEED: u64 = 1_000_003;

fn default_alpha0() -> f64 {
    DEFAULT_ALPHA0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Epochs to train; the step horizon is `epochs * steps_per_epoch`.
    pub epochs: u64,
    /// Directory traces are written into; `None` keeps results in memory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub lipschitz: LipschitzConfig,
    /// Variant list for `run_sweep`; ignored by `run_single`.
    #[serde(default)]
    pub sweep: Vec<VariantConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `L(w) = 0.5 * ||scale * w||^2`.
    Quadratic {
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
        init_point: Vec<f64>,
    },
    Rosenbrock { dim: usize, init_point: Vec<f64> },
    Mlp {
        hidden_width: usize,
        #[serde(default = "one_layer")]
        hidden_layers: usize,
        #[serde(default)]
        init: InitScheme,
        data: DataConfig,
    },
}

fn one() -> f64 {
    1.0
}

fn one_layer() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Deterministic synthetic digit corpus; the test split doubles as the
    /// validation set.
    Synthetic {
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        #[serde(default = "default_corpus_seed")]
        corpus_seed: u64,
    },
    /// IDX image/label pairs on disk (`.gz` transparently decompressed).
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        val_images: Option<PathBuf>,
        #[serde(default)]
        val_labels: Option<PathBuf>,
    },
}

fn default_train_per_class() -> usize {
    data::MINI_TRAIN / 10
}

fn default_test_per_class() -> usize {
    data::MINI_TEST / 10
}

fn default_corpus_seed() -> u64 {
    DEFAULT_CORPUS_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_beta1() -> f64 {
    DEFAULT_BETA1
}

fn default_beta2() -> f64 {
    DEFAULT_BETA2
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: default_beta1(),
            beta2: default_beta2(),
            rho: default_rho(),
        }
    }
}

/// Schedule selection. `derived` computes a constant rate from the estimated
/// Lipschitz constant; every other kind names a fixed schedule whose horizon
/// is filled in from the run's step count. `alpha0` defaults to 1e-2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Derived {
        /// Optional δ² factor in the step-size denominator.
        #[serde(default)]
        delta_sq: Option<f64>,
        /// Loss at the minimum, when known; defaults to 0.
        #[serde(default)]
        loss_at_min: Option<f64>,
    },
    Constant {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
    },
    Linear {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
        #[serde(default = "default_start_factor")]
        start_factor: f64,
        #[serde(default = "one")]
        end_factor: f64,
    },
    StepLr {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
        #[serde(default = "default_milestones")]
        milestones: (u64, u64),
    },
    OneCycle {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
        #[serde(default = "default_pct_up")]
        pct_up: f64,
        #[serde(default = "default_div_factor")]
        div_factor: f64,
        #[serde(default = "default_final_div")]
        final_div: f64,
    },
    SqrtDecay {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
    },
    InverseTime {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
    },
    Cosine {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
        #[serde(default = "default_alpha_min")]
        alpha_min: f64,
    },
    Exponential {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
        #[serde(default = "default_decay_rate")]
        decay_rate: f64,
    },
    ConstOverSqrtT {
        #[serde(default = "default_alpha0")]
        alpha0: f64,
    },
}

fn default_start_factor() -> f64 {
    0.1
}

fn default_milestones() -> (u64, u64) {
    (40, 80)
}

fn default_pct_up() -> f64 {
    0.3
}

fn default_div_factor() -> f64 {
    25.0
}

fn default_final_div() -> f64 {
    1e4
}

fn default_alpha_min() -> f64 {
    1e-3
}

fn default_decay_rate() -> f64 {
    1e-3
}

impl ScheduleConfig {
    pub fn is_derived(&self) -> bool {
        matches!(self, ScheduleConfig::Derived { .. })
    }

    /// Instantiates the named schedule over `total` steps. The derived kind
    /// has no closed form here; callers resolve it to a constant first.
    pub fn build(&self, total: u64) -> Result<Schedule> {
        let schedule = match *self {
            ScheduleConfig::Derived { .. } => {
                return Err(Error::config(
                    "derived schedule must be resolved to a constant rate before building",
                ));
            }
            ScheduleConfig::Constant { alpha0 } => Schedule::Constant { alpha0, total },
            ScheduleConfig::Linear {
                alpha0,
                start_factor,
                end_factor,
            } => Schedule::Linear {
                alpha0,
                total,
                start_factor,
                end_factor,
            },
            ScheduleConfig::StepLr { alpha0, milestones } => Schedule::StepLr {
                alpha0,
                total,
                milestones,
            },
            ScheduleConfig::OneCycle {
                alpha0,
                pct_up,
                div_factor,
                final_div,
            } => Schedule::OneCycle {
                alpha0,
                total,
                pct_up,
                div_factor,
                final_div,
            },
            ScheduleConfig::SqrtDecay { alpha0 } => Schedule::SqrtDecay { alpha0, total },
            ScheduleConfig::InverseTime { alpha0 } => Schedule::InverseTime { alpha0, total },
            ScheduleConfig::Cosine { alpha0, alpha_min } => Schedule::Cosine {
                alpha0,
                total,
                alpha_min,
            },
            ScheduleConfig::Exponential { alpha0, decay_rate } => Schedule::Exponential {
                alpha0,
                total,
                decay_rate,
            },
            ScheduleConfig::ConstOverSqrtT { alpha0 } => {
                Schedule::ConstOverSqrtT { alpha0, total }
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Short label for file names and summary rows.
    pub fn label(&self) -> String {
        match *self {
            ScheduleConfig::Derived { .. } => "derived".to_string(),
            ScheduleConfig::Constant { alpha0 } => format!("constant({alpha0:?})"),
            ScheduleConfig::Linear { alpha0, .. } => format!("linear({alpha0:?})"),
            ScheduleConfig::StepLr { alpha0, .. } => format!("step_lr({alpha0:?})"),
            ScheduleConfig::OneCycle { alpha0, .. } => format!("one_cycle({alpha0:?})"),
            ScheduleConfig::SqrtDecay { alpha0 } => format!("sqrt_decay({alpha0:?})"),
            ScheduleConfig::InverseTime { alpha0 } => format!("inverse_time({alpha0:?})"),
            ScheduleConfig::Cosine { alpha0, .. } => format!("cosine({alpha0:?})"),
            ScheduleConfig::Exponential { alpha0, .. } => format!("exponential({alpha0:?})"),
            ScheduleConfig::ConstOverSqrtT { alpha0 } => format!("const_over_sqrt_t({alpha0:?})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    #[default]
    FullBatch,
    MiniBatch { batch_size: usize },
}

impl ModeConfig {
    pub fn to_run_mode(self) -> RunMode {
        match self {
            ModeConfig::FullBatch => RunMode::FullBatch,
            ModeConfig::MiniBatch { batch_size } => RunMode::MiniBatch { batch_size },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzConfig {
    /// Weight samples for the gradient-norm estimator.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

fn default_samples() -> usize {
    lipschitz::DEFAULT_SAMPLES
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig {
            samples: default_samples(),
            sampler: SamplerConfig::default(),
        }
    }
}

/// Weight distribution the estimator samples from. The default mirrors the
/// model's own initializer family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Initializer-family sampling (MLP problems); `scheme` overrides the
    /// model's own family.
    Init {
        #[serde(default)]
        scheme: Option<InitScheme>,
    },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    UniformBall { radius: f64 },
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::Init { scheme: None }
    }
}

/// One sweep entry: overrides the base schedule and/or mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub mode: Option<ModeConfig>,
}

impl VariantConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_none() && self.mode.is_none() {
            return Err(Error::config(
                "sweep variant overrides neither schedule nor mode",
            ));
        }
        Ok(())
    }

    /// The base config with this variant's overrides applied (and the sweep
    /// list cleared, so the result describes exactly one run).
    pub fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        self.validate()?;
        let mut cfg = base.clone();
        cfg.sweep = Vec::new();
        if let Some(s) = &self.schedule {
            cfg.schedule = s.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return sanitize_label(name);
        }
        let mut parts = Vec::new();
        if let Some(s) = &self.schedule {
            parts.push(s.label());
        }
        if let Some(m) = &self.mode {
            parts.push(match m {
                ModeConfig::FullBatch => "full_batch".to_string(),
                ModeConfig::MiniBatch { batch_size } => format!("mini_batch({batch_size})"),
            });
        }
        sanitize_label(&parts.join("_"))
    }
}

/// File-name-safe form of a label: alphanumerics, `.`, `_`, `-` kept,
/// everything else collapsed to single dashes.
pub fn sanitize_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let trimmed = out.trim_end_matches('-');
    if trimmed.is_empty() {
        "run".to_string()
    } else {
        trimmed.to_string()
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::config(format!("config serialize: {e}")))
    }

    /// First 64 bits of the SHA-256 of the canonical TOML form, as hex.
    /// Identifies the exact config inside trace headers.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        // configs round-trip through TOML (sidecar copy, hashing), whose
        // integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(Error::config(format!(
                "seed = {} exceeds the largest TOML integer {}",
                self.seed,
                i64::MAX
            )));
        }
        let OptimizerConfig { beta1, beta2, rho } = self.optimizer;
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::config(format!("{name} = {b} must lie in [0, 1)")));
            }
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::config(format!("rho = {rho} must be positive")));
        }
        match &self.problem {
            ProblemConfig::Quadratic {
                dim,
                scale,
                init_point,
            } => {
                if *dim == 0 {
                    return Err(Error::config("quadratic dim must be at least 1"));
                }
                if !(scale.is_finite() && *scale != 0.0) {
                    return Err(Error::config(format!(
                        "quadratic scale = {scale} must be finite and non-zero"
                    )));
                }
                check_init_point(init_point, *dim)?;
            }
            ProblemConfig::Rosenbrock { dim, init_point } => {
                if *dim < 2 {
                    return Err(Error::config("rosenbrock needs dimension at least 2"));
                }
                check_init_point(init_point, *dim)?;
            }
            ProblemConfig::Mlp {
                hidden_width,
                hidden_layers,
                data,
                ..
            } => {
                if *hidden_width == 0 || *hidden_layers == 0 {
                    return Err(Error::config("mlp width and depth must be at least 1"));
                }
                match data {
                    DataConfig::Synthetic {
                        train_per_class,
                        test_per_class,
                        ..
                    } => {
                        if *train_per_class == 0 || *test_per_class == 0 {
                            return Err(Error::config(
                                "synthetic per-class counts must be at least 1",
                            ));
                        }
                    }
                    DataConfig::Idx {
                        val_images,
                        val_labels,
                        ..
                    } => {
                        if val_images.is_some() != val_labels.is_some() {
                            return Err(Error::config(
                                "val_images and val_labels must be given together",
                            ));
                        }
                    }
                }
            }
        }
        if let ModeConfig::MiniBatch { batch_size } = self.mode {
            if batch_size == 0 {
                return Err(Error::config("batch size must be at least 1"));
            }
        }
        if self.lipschitz.samples == 0 {
            return Err(Error::config("lipschitz sample count must be at least 1"));
        }
        if let SamplerConfig::UniformBox { lo, hi } = &self.lipschitz.sampler {
            BoxBounds::new(lo.clone(), hi.clone())?;
        }
        // variant *parameter* errors are deliberately not checked here: a bad
        // variant fails on its own inside run_sweep while the rest continue
        for variant in &self.sweep {
            variant.validate()?;
        }
        Ok(())
    }

    /// Instantiates the problem, loading or generating its dataset.
    pub fn build_problem(&self) -> Result<Problem> {
        match &self.problem {
            ProblemConfig::Quadratic { dim, scale, .. } => {
                let mut a = vec![0.0; dim * dim];
                for i in 0..*dim {
                    a[i * dim + i] = *scale;
                }
                Problem::quadratic(a, vec![0.0; *dim], *dim, *dim)
            }
            ProblemConfig::Rosenbrock { dim, .. } => Problem::rosenbrock(*dim),
            ProblemConfig::Mlp {
                hidden_width,
                hidden_layers,
                init,
                data,
            } => {
                let (train, val) = match data {
                    DataConfig::Synthetic {
                        train_per_class,
                        test_per_class,
                        corpus_seed,
                    } => {
                        let (train, test) =
                            data::synthetic_digits(*train_per_class, *test_per_class, *corpus_seed)?;
                        (train, Some(test))
                    }
                    DataConfig::Idx {
                        train_images,
                        train_labels,
                        val_images,
                        val_labels,
                    } => {
                        let train = data::load_idx(train_images, train_labels)?;
                        let val = match (val_images, val_labels) {
                            (Some(vi), Some(vl)) => Some(data::load_idx(vi, vl)?),
                            _ => None,
                        };
                        (train, val)
                    }
                };
                let spec = MlpSpec {
                    input_dim: train.dim(),
                    hidden_width: *hidden_width,
                    hidden_layers: *hidden_layers,
                    output_dim: train.classes(),
                    init: *init,
                    seed: self.seed,
                };
                Problem::mlp(spec, train, val)
            }
        }
    }

    /// Initial iterate: the configured point for synthetic problems, the
    /// seeded initializer draw for MLPs. Depends only on the seed and the
    /// problem spec, never on schedule or mode, so sweep variants share it
    /// bit for bit.
    pub fn initial_point(&self, problem: &Problem) -> Result<ParamVector> {
        match (&self.problem, problem) {
            (ProblemConfig::Quadratic { init_point, .. }, _)
            | (ProblemConfig::Rosenbrock { init_point, .. }, _) => {
                ParamVector::new(init_point.clone())
            }
            (ProblemConfig::Mlp { .. }, Problem::Mlp { spec, layout, .. }) => {
                let mut rng = RngStream::new(spec.seed);
                Ok(models::init_params(layout, spec.init, &mut rng))
            }
            (ProblemConfig::Mlp { .. }, _) => Err(Error::config(
                "problem instance does not match the mlp config",
            )),
        }
    }

    /// Weight sampler for the Lipschitz estimator. `init` without an explicit
    /// scheme mirrors the model's own initializer.
    pub fn weight_sampler(&self, problem: &Problem) -> Result<WeightSampler> {
        let sampler = match &self.lipschitz.sampler {
            SamplerConfig::Init { scheme } => {
                let fallback = match &self.problem {
                    ProblemConfig::Mlp { init, .. } => Some(*init),
                    _ => None,
                };
                let scheme = scheme.or(fallback).ok_or_else(|| {
                    Error::config(
                        "initializer-family sampling needs an mlp problem; configure a \
                         uniform_box or uniform_ball sampler instead",
                    )
                })?;
                WeightSampler::Init(scheme)
            }
            SamplerConfig::UniformBox { lo, hi } => {
                WeightSampler::UniformBox(BoxBounds::new(lo.clone(), hi.clone())?)
            }
            SamplerConfig::UniformBall { radius } => WeightSampler::UniformBall { radius: *radius },
        };
        sampler.validate(problem)?;
        Ok(sampler)
    }

    /// The dataset backing the problem, when there is one.
    pub fn has_dataset(&self) -> bool {
        matches!(self.problem, ProblemConfig::Mlp { .. })
    }
}

fn check_init_point(point: &[f64], dim: usize) -> Result<()> {
    if point.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: point.len(),
            context: "init_point",
        });
    }
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::config("init_point entries must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
epochs = 100

[problem]
kind = "mlp"
hidden_width = 300

[problem.data]
source = "synthetic"

[schedule]
kind = "derived"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.epochs, 100);
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.optimizer.beta1, 0.9);
        assert_eq!(cfg.optimizer.beta2, 0.999);
        assert_eq!(cfg.optimizer.rho, 1e-8);
        assert_eq!(cfg.mode, ModeConfig::FullBatch);
        assert_eq!(cfg.lipschitz.samples, 1000);
        assert!(cfg.schedule.is_derived());
        assert!(cfg.sweep.is_empty());
        match &cfg.problem {
            ProblemConfig::Mlp {
                hidden_layers,
                init,
                data,
                ..
            } => {
                assert_eq!(*hidden_layers, 1);
                assert_eq!(*init, InitScheme::KaimingUniform);
                assert_eq!(
                    *data,
                    DataConfig::Synthetic {
                        train_per_class: 550,
                        test_per_class: 100,
                        corpus_seed: DEFAULT_CORPUS_SEED,
                    }
                );
            }
            other => panic!("unexpected problem {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = format!("{MINIMAL}\nbogus = 1\n");
        assert!(ExperimentConfig::from_toml_str(&top).is_err());

        let nested = MINIMAL.replace("kind = \"derived\"", "kind = \"derived\"\ntypo_rate = 0.1");
        let err = ExperimentConfig::from_toml_str(&nested).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err}");

        let sched = MINIMAL.replace(
            "kind = \"derived\"",
            "kind = \"step_lr\"\nmilestone = 40",
        );
        assert!(ExperimentConfig::from_toml_str(&sched).is_err());
    }

    #[test]
    fn schedule_defaults_match_the_published_table() {
        let text = MINIMAL.replace("kind = \"derived\"", "kind = \"step_lr\"");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let schedule = cfg.schedule.build(100).unwrap();
        assert_eq!(
            schedule,
            Schedule::StepLr {
                alpha0: 1e-2,
                total: 100,
                milestones: (40, 80)
            }
        );

        let text = MINIMAL.replace("kind = \"derived\"", "kind = \"one_cycle\"");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(
            cfg.schedule.build(100).unwrap(),
            Schedule::OneCycle {
                alpha0: 1e-2,
                total: 100,
                pct_up: 0.3,
                div_factor: 25.0,
                final_div: 1e4
            }
        );
    }

    #[test]
    fn roundtrip_preserves_the_config_and_its_hash() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.sweep = vec![
            VariantConfig {
                name: None,
                schedule: Some(ScheduleConfig::Constant { alpha0: 1e-3 }),
                mode: None,
            },
            VariantConfig {
                name: Some("big batches".into()),
                schedule: None,
                mode: Some(ModeConfig::MiniBatch { batch_size: 512 }),
            },
        ];
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash().unwrap(), back.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 16);

        let other = ExperimentConfig::from_toml_str(&MINIMAL.replace("seed = 7", "seed = 8"))
            .unwrap();
        assert_ne!(cfg.hash().unwrap(), other.hash().unwrap());
    }

    #[test]
    fn quadratic_config_builds_the_scaled_problem() {
        let text = r#"
seed = 1
epochs = 10

[problem]
kind = "quadratic"
dim = 2
scale = 3.0
init_point = [1.0, -1.0]

[schedule]
kind = "constant"
alpha0 = 0.1
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let p = cfg.build_problem().unwrap();
        let w = cfg.initial_point(&p).unwrap();
        assert_eq!(w.values(), &[1.0, -1.0]);
        // L = 0.5 * ||3w||^2 = 0.5 * 9 * 2
        assert_eq!(p.loss(&w).unwrap(), 9.0);
    }

    #[test]
    fn init_point_must_match_dim() {
        let text = r#"
seed = 1
epochs = 10

[problem]
kind = "rosenbrock"
dim = 2
init_point = [1.0, 2.0, 3.0]

[schedule]
kind = "constant"
"#;
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("init_point"), "{err}");
    }

    #[test]
    fn variant_must_override_something() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let empty = VariantConfig {
            name: Some("noop".into()),
            schedule: None,
            mode: None,
        };
        assert!(empty.apply(&cfg).is_err());

        let real = VariantConfig {
            name: None,
            schedule: Some(ScheduleConfig::Constant { alpha0: 1e-2 }),
            mode: None,
        };
        let applied = real.apply(&cfg).unwrap();
        assert!(applied.sweep.is_empty());
        assert_eq!(applied.schedule, ScheduleConfig::Constant { alpha0: 1e-2 });
        assert_eq!(applied.seed, cfg.seed);
    }

    #[test]
    fn labels_are_file_name_safe() {
        assert_eq!(sanitize_label("constant(0.01)"), "constant-0.01");
        assert_eq!(sanitize_label("mini_batch(512)"), "mini_batch-512");
        assert_eq!(sanitize_label("(((("), "run");
        let v = VariantConfig {
            name: None,
            schedule: Some(ScheduleConfig::Derived {
                delta_sq: None,
                loss_at_min: None,
            }),
            mode: Some(ModeConfig::MiniBatch { batch_size: 256 }),
        };
        assert_eq!(v.label(), "derived_mini_batch-256");
    }

    #[test]
    fn sampler_defaults_to_the_model_family() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let small = ExperimentConfig {
            problem: ProblemConfig::Mlp {
                hidden_width: 4,
                hidden_layers: 1,
                init: InitScheme::XavierNormal,
                data: DataConfig::Synthetic {
                    train_per_class: 2,
                    test_per_class: 1,
                    corpus_seed: 3,
                },
            },
            ..cfg
        };
        let p = small.build_problem().unwrap();
        let s = small.weight_sampler(&p).unwrap();
        assert_eq!(s, WeightSampler::Init(InitScheme::XavierNormal));
    }

    #[test]
    fn non_mlp_derived_needs_an_explicit_sampler() {
        let text = r#"
seed = 1
epochs = 10

[problem]
kind = "quadratic"
dim = 1
init_point = [2.0]

[schedule]
kind = "derived"
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let p = cfg.build_problem().unwrap();
        let err = cfg.weight_sampler(&p).unwrap_err();
        assert!(err.to_string().contains("uniform_box"), "{err}");

        let mut with_ball = cfg.clone();
        with_ball.lipschitz.sampler = SamplerConfig::UniformBall { radius: 2.0 };
        assert!(with_ball.weight_sampler(&p).is_ok());
    }
}
