//! Optimization problems: the MLP classification task plus two analytic
//! objectives with closed-form gradients (a linear least-squares quadratic
//! and the Rosenbrock function), used wherever a certifiable gradient or a
//! known minimizer is needed.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{self, BatchView, InitScheme, MlpLayout, MlpSpec};
use crate::numerics::{linalg, ParamVector, RngStream};

/// Axis-aligned box, the support for weight sampling and gradient bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::config(format!(
                "box bounds need matching non-empty sides, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::config(format!("box axis {i} is unbounded")));
            }
            if l > h {
                return Err(Error::config(format!("box axis {i} has lo {l} > hi {h}")));
            }
        }
        Ok(BoxBounds { lo, hi })
    }

    /// `[-half_width, half_width]^dim`
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        BoxBounds::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Largest coordinate magnitude over the box.
    pub fn max_abs(&self) -> f64 {
        self.lo
            .iter()
            .chain(&self.hi)
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    fn corner(&self, mask: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
            .collect()
    }
}

/// Reusable buffers for gathering a mini-batch out of a dataset.
#[derive(Debug, Default)]
pub struct GatherScratch {
    inputs: Vec<f64>,
    labels: Vec<u8>,
}

#[derive(Debug, Clone)]
pub enum Problem {
    /// `L(w) = 0.5 * ||A w - b||^2`, `A` row-major `rows x cols`.
    Quadratic {
        a: Vec<f64>,
        b: Vec<f64>,
        rows: usize,
        cols: usize,
    },
    /// Coupled-sum Rosenbrock with a=1, b=100; minimum 0 at the all-ones
    /// vector.
    Rosenbrock { dim: usize },
    Mlp {
        spec: MlpSpec,
        layout: MlpLayout,
        train: Dataset,
        val: Option<Dataset>,
    },
}

impl Problem {
    pub fn quadratic(a: Vec<f64>, b: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || a.len() != rows * cols || b.len() != rows {
            return Err(Error::config(format!(
                "quadratic shapes inconsistent: A has {} entries for {rows}x{cols}, b has {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::config("quadratic coefficients must be finite"));
        }
        Ok(Problem::Quadratic { a, b, rows, cols })
    }

    /// `L(w) = 0.5 * ||w||^2`
    pub fn identity_quadratic(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Problem::Quadratic {
            a,
            b: vec![0.0; dim],
            rows: dim,
            cols: dim,
        }
    }

    pub fn rosenbrock(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config("rosenbrock needs dimension at least 2"));
        }
        Ok(Problem::Rosenbrock { dim })
    }

    pub fn mlp(spec: MlpSpec, train: Dataset, val: Option<Dataset>) -> Result<Self> {
        let layout = MlpLayout::new(&spec)?;
        for (name, ds) in std::iter::once(("train", &train)).chain(val.as_ref().map(|v| ("val", v)))
        {
            if ds.dim() != layout.input_dim() {
                return Err(Error::Dimension {
                    expected: layout.input_dim(),
                    got: ds.dim(),
                    context: "dataset feature width",
                });
            }
            if ds.classes() > layout.output_dim() {
                return Err(Error::data(format!(
                    "{name} set has {} classes, model outputs {}",
                    ds.classes(),
                    layout.output_dim()
                )));
            }
        }
        Ok(Problem::Mlp {
            spec,
            layout,
            train,
            val,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Problem::Quadratic { .. } => "quadratic",
            Problem::Rosenbrock { .. } => "rosenbrock",
            Problem::Mlp { .. } => "mlp",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Problem::Quadratic { cols, .. } => *cols,
            Problem::Rosenbrock { dim } => *dim,
            Problem::Mlp { layout, .. } => layout.param_count(),
        }
    }

    /// Number of training examples, for problems with a data axis.
    pub fn data_len(&self) -> Option<usize> {
        match self {
            Problem::Mlp { train, .. } => Some(train.n()),
            _ => None,
        }
    }

    pub fn mlp_layout(&self) -> Option<&MlpLayout> {
        match self {
            Problem::Mlp { layout, .. } => Some(layout),
            _ => None,
        }
    }

    pub fn train_set(&self) -> Option<&Dataset> {
        match self {
            Problem::Mlp { train, .. } => Some(train),
            _ => None,
        }
    }

    fn check_dim(&self, w: &ParamVector) -> Result<()> {
        if w.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: w.len(),
                context: "problem parameters",
            });
        }
        Ok(())
    }

    /// Full objective and gradient (full-batch for the MLP). A non-finite
    /// loss or gradient (an exploding run) comes back as a numerical error.
    pub fn loss_and_grad(&self, w: &ParamVector) -> Result<(f64, ParamVector)> {
        self.check_dim(w)?;
        match self {
            Problem::Quadratic { a, b, rows, cols } => {
                let (loss, g) = quad_loss_grad(a, b, *rows, *cols, w.values());
                finite_pair(loss, g)
            }
            Problem::Rosenbrock { .. } => {
                let (loss, g) = rosenbrock_loss_grad(w.values());
                finite_pair(loss, g)
            }
            Problem::Mlp { layout, train, .. } => {
                models::loss_and_grad(layout, w, &train.full_view())
            }
        }
    }

    pub fn loss(&self, w: &ParamVector) -> Result<f64> {
        self.check_dim(w)?;
        let loss = match self {
            Problem::Quadratic { a, b, rows, cols } => {
                let r = quad_residual(a, b, *rows, *cols, w.values());
                0.5 * linalg::dot_slices(&r, &r)
            }
            Problem::Rosenbrock { .. } => rosenbrock_loss_grad(w.values()).0,
            Problem::Mlp { layout, train, .. } => {
                return models::loss_only(layout, w, &train.full_view())
            }
        };
        if !loss.is_finite() {
            return Err(Error::numerical(format!("non-finite loss {loss}")));
        }
        Ok(loss)
    }

    /// Objective and gradient restricted to the training examples in `idx`.
    /// Only defined for problems with a data axis.
    pub fn loss_and_grad_batch(
        &self,
        w: &ParamVector,
        idx: &[usize],
        scratch: &mut GatherScratch,
    ) -> Result<(f64, ParamVector)> {
        match self {
            Problem::Mlp { layout, train, .. } => {
                self.check_dim(w)?;
                train.gather(idx, &mut scratch.inputs, &mut scratch.labels)?;
                let batch = BatchView::new(&scratch.inputs, &scratch.labels, train.dim())?;
                models::loss_and_grad(layout, w, &batch)
            }
            _ => Err(Error::config(format!(
                "{} has no data axis to batch over",
                self.kind_name()
            ))),
        }
    }

    /// Validation loss and accuracy, when a validation set is attached.
    pub fn evaluate_validation(&self, w: &ParamVector) -> Result<Option<(f64, f64)>> {
        match self {
            Problem::Mlp {
                layout,
                val: Some(val),
                ..
            } => {
                self.check_dim(w)?;
                models::evaluate(layout, w, &val.full_view()).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Loss at the known global minimizer, when one exists in closed form.
    pub fn known_min_loss(&self) -> Option<f64> {
        match self {
            Problem::Rosenbrock { .. } => Some(0.0),
            Problem::Quadratic { a, b, rows, cols } if rows == cols => {
                solve_square(a, b, *rows).map(|w| {
                    let r = quad_residual(a, b, *rows, *cols, &w);
                    0.5 * linalg::dot_slices(&r, &r)
                })
            }
            _ => None,
        }
    }

    pub fn known_minimizer(&self) -> Option<ParamVector> {
        match self {
            Problem::Rosenbrock { dim } => Some(ParamVector::new(vec![1.0; *dim]).expect("finite")),
            Problem::Quadratic { a, b, rows, cols } if rows == cols => {
                solve_square(a, b, *rows).map(|w| ParamVector::new(w).expect("finite"))
            }
            _ => None,
        }
    }

    /// Certified upper bound on `||grad L||` over `domain`. Exact for the
    /// quadratic (the gradient norm is convex, so its maximum over a box sits
    /// at a corner); grid-plus-Hessian-margin for the 2-D Rosenbrock; a
    /// coarse coordinatewise bound in higher Rosenbrock dimensions. MLP
    /// losses have no certified bound.
    pub fn gradient_bound(&self, domain: &BoxBounds) -> Result<f64> {
        if !matches!(self, Problem::Mlp { .. }) && domain.dim() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: domain.dim(),
                context: "bound box",
            });
        }
        match self {
            Problem::Quadratic { a, b, rows, cols } => {
                if domain.dim() > 20 {
                    return Err(Error::config(
                        "corner enumeration is limited to 20 dimensions",
                    ));
                }
                let mut best = 0.0f64;
                for mask in 0..1usize << domain.dim() {
                    let w = domain.corner(mask);
                    let (_, g) = quad_loss_grad(a, b, *rows, *cols, &w);
                    best = best.max(linalg::dot_slices(&g, &g).sqrt());
                }
                Ok(best)
            }
            Problem::Rosenbrock { dim } => {
                if *dim == 2 {
                    Ok(rosenbrock_grid_bound(domain))
                } else {
                    let m = domain.max_abs();
                    let per_coord = 2.0 * (1.0 + m) + 400.0 * m * (m + m * m) + 200.0 * (m + m * m);
                    Ok(per_coord * (*dim as f64).sqrt())
                }
            }
            Problem::Mlp { .. } => Err(Error::config(
                "no certified gradient bound for mlp losses; use the sampled estimate",
            )),
        }
    }

    /// Exact sup of `||grad L||` over the ball `||w|| <= radius`, available
    /// when `A` is a multiple of the identity: the gradient is then
    /// `s^2 w - s b`, whose norm peaks at `s^2 radius + s ||b||`.
    pub fn ball_gradient_sup(&self, radius: f64) -> Option<f64> {
        match self {
            Problem::Quadratic { a, b, rows, cols } if rows == cols => {
                let s = a[0];
                for i in 0..*rows {
                    for j in 0..*cols {
                        let want = if i == j { s } else { 0.0 };
                        if a[i * cols + j] != want {
                            return None;
                        }
                    }
                }
                let bnorm = linalg::dot_slices(b, b).sqrt();
                Some(s * s * radius + s.abs() * bnorm)
            }
            _ => None,
        }
    }
}

fn finite_pair(loss: f64, g: Vec<f64>) -> Result<(f64, ParamVector)> {
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite loss {loss}")));
    }
    Ok((loss, ParamVector::new(g)?))
}

fn quad_residual(a: &[f64], b: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| linalg::dot_slices(&a[i * cols..(i + 1) * cols], w) - b[i])
        .collect()
}

fn quad_loss_grad(a: &[f64], b: &[f64], rows: usize, cols: usize, w: &[f64]) -> (f64, Vec<f64>) {
    let r = quad_residual(a, b, rows, cols, w);
    let mut g = vec![0.0; cols];
    for i in 0..rows {
        linalg::add_scaled(&mut g, r[i], &a[i * cols..(i + 1) * cols]);
    }
    let loss = 0.5 * linalg::dot_slices(&r, &r);
    (loss, g)
}

fn rosenbrock_loss_grad(w: &[f64]) -> (f64, Vec<f64>) {
    let d = w.len();
    let mut loss = 0.0;
    let mut g = vec![0.0; d];
    for i in 0..d - 1 {
        let (x, y) = (w[i], w[i + 1]);
        let gap = y - x * x;
        loss += (1.0 - x) * (1.0 - x) + 100.0 * gap * gap;
        g[i] += -2.0 * (1.0 - x) - 400.0 * x * gap;
        g[i + 1] += 200.0 * gap;
    }
    (loss, g)
}

/// Dense-grid maximum of the 2-D Rosenbrock gradient norm over the box,
/// padded by a Gershgorin Hessian bound times the grid cell half-diagonal,
/// which certifies it as an upper bound on the true supremum.
fn rosenbrock_grid_bound(domain: &BoxBounds) -> f64 {
    const N: usize = 1000;
    let axis = |k: usize| -> (f64, f64) { (domain.lo()[k], domain.hi()[k]) };
    let coord = |k: usize, i: usize| -> f64 {
        let (lo, hi) = axis(k);
        if i == N - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (N - 1) as f64
        }
    };
    let mut grid_max = 0.0f64;
    for i in 0..N {
        let x = coord(0, i);
        for j in 0..N {
            let y = coord(1, j);
            let gx = -400.0 * x * (y - x * x) - 2.0 * (1.0 - x);
            let gy = 200.0 * (y - x * x);
            grid_max = grid_max.max((gx * gx + gy * gy).sqrt());
        }
    }
    let m = domain.max_abs();
    // row-sum bound: |H_xx| <= 1200 m^2 + 400 m + 202, |H_xy| <= 400 m,
    // |H_yy| = 200
    let hessian_bound = 1200.0 * m * m + 400.0 * m + 202.0 + 2.0 * 400.0 * m;
    let (hx, hy) = (
        (axis(0).1 - axis(0).0) / (N - 1) as f64,
        (axis(1).1 - axis(1).0) / (N - 1) as f64,
    );
    let half_diag = 0.5 * (hx * hx + hy * hy).sqrt();
    grid_max + hessian_bound * half_diag
}

/// Gaussian elimination with partial pivoting; None when a pivot collapses.
fn solve_square(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&r1, &r2| {
            m[r1 * n + col]
                .abs()
                .partial_cmp(&m[r2 * n + col].abs())
                .expect("finite")
        })?;
        if m[pivot_row * n + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        for row in 0..col {
            let f = m[row * n + col] / m[col * n + col];
            x[row] -= f * x[col];
        }
        x[col] /= m[col * n + col];
    }
    Some(x)
}

/// Weight distributions for gradient-norm sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSampler {
    /// Draw from one of the model initializer families (MLP problems only).
    Init(InitScheme),
    /// Coordinatewise uniform over an axis-aligned box.
    UniformBox(BoxBounds),
    /// Uniform over the solid ball of the given radius.
    UniformBall { radius: f64 },
}

impl WeightSampler {
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        match self {
            WeightSampler::Init(_) => {
                if problem.mlp_layout().is_none() {
                    return Err(Error::config(
                        "initializer-family sampling requires an mlp problem",
                    ));
                }
            }
            WeightSampler::UniformBox(b) => {
                if b.dim() != problem.dimension() {
                    return Err(Error::Dimension {
                        expected: problem.dimension(),
                        got: b.dim(),
                        context: "sampler box",
                    });
                }
            }
            WeightSampler::UniformBall { radius } => {
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::config(format!("ball radius {radius} must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, problem: &Problem, rng: &mut RngStream) -> Result<ParamVector> {
        self.validate(problem)?;
        let dim = problem.dimension();
        match self {
            WeightSampler::Init(scheme) => {
                let layout = problem.mlp_layout().expect("validated");
                Ok(models::init_params(layout, *scheme, rng))
            }
            WeightSampler::UniformBox(b) => {
                let w: Vec<f64> = (0..dim).map(|i| rng.uniform(b.lo()[i], b.hi()[i])).collect();
                ParamVector::new(w)
            }
            WeightSampler::UniformBall { radius } => {
                let mut dir: Vec<f64>;
                let mut norm;
                loop {
                    dir = (0..dim).map(|_| rng.standard_normal()).collect();
                    norm = linalg::dot_slices(&dir, &dir).sqrt();
                    if norm > 0.0 {
                        break;
                    }
                }
                let r = radius * rng.uniform(0.0, 1.0).powf(1.0 / dim as f64);
                for x in dir.iter_mut() {
                    *x *= r / norm;
                }
                ParamVector::new(dir)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            WeightSampler::Init(s) => format!("init:{}", s.name()),
            WeightSampler::UniformBox(_) => "uniform_box".to_string(),
            WeightSampler::UniformBall { radius } => format!("uniform_ball(r={radius})"),
        }
    }

    /// Certified sup of the problem's gradient norm over this sampler's
    /// support, when one is available.
    pub fn support_gradient_sup(&self, problem: &Problem) -> Option<f64> {
        match self {
            WeightSampler::UniformBox(b) => problem.gradient_bound(b).ok(),
            WeightSampler::UniformBall { radius } => problem.ball_gradient_sup(*radius),
            WeightSampler::Init(_) => None,
        }
    }
}
