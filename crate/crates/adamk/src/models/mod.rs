//! Fully connected ReLU networks with softmax cross-entropy.
//!
//! Parameters live in one flat [`ParamVector`]; [`MlpLayout`] records where
//! each layer's weight matrix and bias sit. Layer `l` maps `dims[l]` inputs
//! to `dims[l+1]` outputs as `z = a W^T + b` with `W` stored row-major,
//! `dims = [input, hidden, ..., hidden, classes]`, and every hidden layer
//! followed by ReLU. Depth counts hidden layers.
//!
//! The backward pass is exact (its agreement with central finite differences
//! is part of the test suite), and both passes keep a fixed summation order
//! so results do not depend on thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg;
use crate::numerics::{ParamVector, RngStream};

/// Weight initialization families.
///
/// Defaults fixed here: `Normal` is zero-mean with sigma = 0.02, `Uniform`
/// draws from (-0.1, 0.1). Kaiming uses fan-in with the ReLU gain sqrt(2);
/// Xavier is fan-average; Orthogonal uses Gram-Schmidt QR with gain 1.
/// Biases are zero under every scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    KaimingUniform,
    XavierNormal,
    Orthogonal,
    Normal,
    Uniform,
}

impl InitScheme {
    pub const ALL: [InitScheme; 5] = [
        InitScheme::KaimingUniform,
        InitScheme::XavierNormal,
        InitScheme::Orthogonal,
        InitScheme::Normal,
        InitScheme::Uniform,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InitScheme::KaimingUniform => "kaiming_uniform",
            InitScheme::XavierNormal => "xavier_normal",
            InitScheme::Orthogonal => "orthogonal",
            InitScheme::Normal => "normal",
            InitScheme::Uniform => "uniform",
        }
    }
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::KaimingUniform
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub output_dim: usize,
    pub init: InitScheme,
    pub seed: u64,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_width", self.hidden_width),
            ("hidden_layers", self.hidden_layers),
            ("output_dim", self.output_dim),
        ] {
            if v == 0 {
                return Err(Error::config(format!("mlp {name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    /// fan-out
    pub rows: usize,
    /// fan-in
    pub cols: usize,
    pub w_offset: usize,
    pub b_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    dims: Vec<usize>,
    slots: Vec<LayerSlot>,
    total: usize,
}

impl MlpLayout {
    pub fn new(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut dims = Vec::with_capacity(spec.hidden_layers + 2);
        dims.push(spec.input_dim);
        dims.extend(std::iter::repeat(spec.hidden_width).take(spec.hidden_layers));
        dims.push(spec.output_dim);

        let mut slots = Vec::with_capacity(dims.len() - 1);
        let mut offset = 0;
        for l in 0..dims.len() - 1 {
            let (cols, rows) = (dims[l], dims[l + 1]);
            slots.push(LayerSlot {
                rows,
                cols,
                w_offset: offset,
                b_offset: offset + rows * cols,
            });
            offset += rows * (cols + 1);
        }
        Ok(MlpLayout {
            dims,
            slots,
            total: offset,
        })
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn layer_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    fn weights<'a>(&self, params: &'a [f64], l: usize) -> &'a [f64] {
        let s = self.slots[l];
        &params[s.w_offset..s.w_offset + s.rows * s.cols]
    }

    fn biases<'a>(&self, params: &'a [f64], l: usize) -> &'a [f64] {
        let s = self.slots[l];
        &params[s.b_offset..s.b_offset + s.rows]
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.total {
            return Err(Error::Dimension {
                expected: self.total,
                got: params.len(),
                context: "mlp parameters",
            });
        }
        Ok(())
    }
}

/// Draws fresh parameters for `layout` under `scheme`. The draw order (layer
/// by layer, weights row-major, biases untouched at zero) is part of the
/// determinism contract.
pub fn init_params(layout: &MlpLayout, scheme: InitScheme, rng: &mut RngStream) -> ParamVector {
    let mut params = vec![0.0; layout.total];
    for slot in &layout.slots {
        let w = &mut params[slot.w_offset..slot.w_offset + slot.rows * slot.cols];
        match scheme {
            InitScheme::KaimingUniform => {
                let bound = (6.0 / slot.cols as f64).sqrt();
                for x in w.iter_mut() {
                    *x = rng.uniform(-bound, bound);
                }
            }
            InitScheme::XavierNormal => {
                let sigma = (2.0 / (slot.cols + slot.rows) as f64).sqrt();
                for x in w.iter_mut() {
                    *x = sigma * rng.standard_normal();
                }
            }
            InitScheme::Orthogonal => {
                for x in w.iter_mut() {
                    *x = rng.standard_normal();
                }
                orthogonalize(w, slot.rows, slot.cols);
            }
            InitScheme::Normal => {
                for x in w.iter_mut() {
                    *x = 0.02 * rng.standard_normal();
                }
            }
            InitScheme::Uniform => {
                for x in w.iter_mut() {
                    *x = rng.uniform(-0.1, 0.1);
                }
            }
        }
    }
    ParamVector::new(params).expect("initializers draw finite values")
}

/// Builds the layout and draws initial parameters from the spec's seed.
pub fn mlp_new(spec: &MlpSpec) -> Result<(MlpLayout, ParamVector)> {
    let layout = MlpLayout::new(spec)?;
    let mut rng = RngStream::new(spec.seed);
    let params = init_params(&layout, spec.init, &mut rng);
    Ok((layout, params))
}

/// In-place orthogonalization of the Gaussian draw in `w` (rows x cols,
/// row-major): the smaller side becomes an orthonormal system, so
/// `W W^T = I` when rows <= cols and `W^T W = I` otherwise. Two-pass
/// Gram-Schmidt; random Gaussian matrices are far from rank-deficient, and
/// the second pass pushes the residual to rounding level.
fn orthogonalize(w: &mut [f64], rows: usize, cols: usize) {
    if rows <= cols {
        for i in 0..rows {
            for _pass in 0..2 {
                for j in 0..i {
                    let (head, tail) = w.split_at_mut(i * cols);
                    let qj = &head[j * cols..(j + 1) * cols];
                    let ri = &mut tail[..cols];
                    let proj = linalg::dot_slices(qj, ri);
                    linalg::add_scaled(ri, -proj, qj);
                }
            }
            let ri = &mut w[i * cols..(i + 1) * cols];
            let norm = linalg::dot_slices(ri, ri).sqrt();
            for x in ri.iter_mut() {
                *x /= norm;
            }
        }
    } else {
        // orthonormal columns; strided access, only used for tall layers
        for i in 0..cols {
            for _pass in 0..2 {
                for j in 0..i {
                    let mut proj = 0.0;
                    for r in 0..rows {
                        proj += w[r * cols + j] * w[r * cols + i];
                    }
                    for r in 0..rows {
                        w[r * cols + i] -= proj * w[r * cols + j];
                    }
                }
            }
            let mut norm = 0.0;
            for r in 0..rows {
                norm += w[r * cols + i] * w[r * cols + i];
            }
            let norm = norm.sqrt();
            for r in 0..rows {
                w[r * cols + i] /= norm;
            }
        }
    }
}

/// Borrowed view of a classification batch: `n` examples of `input_dim`
/// features, labels in `0..classes`.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a> {
    pub inputs: &'a [f64],
    pub labels: &'a [u8],
    pub input_dim: usize,
}

impl<'a> BatchView<'a> {
    pub fn new(inputs: &'a [f64], labels: &'a [u8], input_dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::data("empty batch"));
        }
        if inputs.len() != labels.len() * input_dim {
            return Err(Error::Dimension {
                expected: labels.len() * input_dim,
                got: inputs.len(),
                context: "batch inputs",
            });
        }
        Ok(BatchView {
            inputs,
            labels,
            input_dim,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

fn check_batch(layout: &MlpLayout, batch: &BatchView) -> Result<()> {
    if batch.input_dim != layout.input_dim() {
        return Err(Error::Dimension {
            expected: layout.input_dim(),
            got: batch.input_dim,
            context: "batch feature width",
        });
    }
    let classes = layout.output_dim();
    if let Some((i, &l)) = batch
        .labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= classes)
    {
        return Err(Error::data(format!(
            "label {l} at example {i} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// `z = a W_l^T + b_l`
fn layer_forward(layout: &MlpLayout, params: &[f64], l: usize, a: &[f64], n: usize, z: &mut Vec<f64>) {
    let slot = layout.slots[l];
    z.resize(n * slot.rows, 0.0);
    linalg::matmul_nt(a, layout.weights(params, l), n, slot.cols, slot.rows, z);
    let b = layout.biases(params, l);
    for row in z.chunks_exact_mut(slot.rows) {
        for (zi, bi) in row.iter_mut().zip(b) {
            *zi += bi;
        }
    }
}

fn relu_in_place(z: &mut [f64]) {
    for x in z.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Mean softmax cross-entropy over the batch, with max-subtraction, plus the
/// logit gradients `(softmax - onehot) / n` written into `dz`. Returns
/// per-batch mean loss.
fn softmax_loss_and_dz(logits: &[f64], labels: &[u8], classes: usize, dz: &mut [f64]) -> f64 {
    let n = labels.len();
    let inv_n = 1.0 / n as f64;
    let mut loss_sum = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let z = &logits[i * classes..(i + 1) * classes];
        let d = &mut dz[i * classes..(i + 1) * classes];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (dj, &zj) in d.iter_mut().zip(z) {
            let e = (zj - m).exp();
            *dj = e;
            sum += e;
        }
        loss_sum += sum.ln() - (z[label as usize] - m);
        let inv_sum = 1.0 / sum;
        for dj in d.iter_mut() {
            *dj *= inv_sum * inv_n;
        }
        d[label as usize] -= inv_n;
    }
    loss_sum * inv_n
}

/// Mean loss and gradient over the batch.
///
/// Divergence surfaces as [`Error::Numerical`] (non-finite loss or gradient);
/// structural problems (shape, labels) use the other error kinds.
pub fn loss_and_grad(
    layout: &MlpLayout,
    params: &ParamVector,
    batch: &BatchView,
) -> Result<(f64, ParamVector)> {
    layout.check_params(params)?;
    check_batch(layout, batch)?;
    let p = params.values();
    let n = batch.n();
    let layers = layout.layer_count();

    // forward, keeping hidden activations for the backward pass
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers - 1);
    let mut logits = Vec::new();
    {
        let mut cur: &[f64] = batch.inputs;
        for l in 0..layers {
            let mut z = Vec::new();
            layer_forward(layout, p, l, cur, n, &mut z);
            if l + 1 < layers {
                relu_in_place(&mut z);
                acts.push(z);
                cur = acts.last().expect("just pushed");
            } else {
                logits = z;
            }
        }
    }

    let classes = layout.output_dim();
    let mut dcur = vec![0.0; n * classes];
    let loss = softmax_loss_and_dz(&logits, batch.labels, classes, &mut dcur);

    let mut grad = vec![0.0; layout.param_count()];
    for l in (0..layers).rev() {
        let slot = layout.slots[l];
        let below: &[f64] = if l == 0 { batch.inputs } else { &acts[l - 1] };

        // dW_l = dz^T * a_{l-1}; db_l = column sums of dz
        linalg::matmul_tn(
            &dcur,
            below,
            slot.rows,
            n,
            slot.cols,
            &mut grad[slot.w_offset..slot.w_offset + slot.rows * slot.cols],
        );
        {
            let db = &mut grad[slot.b_offset..slot.b_offset + slot.rows];
            for row in dcur.chunks_exact(slot.rows) {
                for (d, x) in db.iter_mut().zip(row) {
                    *d += x;
                }
            }
        }

        if l > 0 {
            // da_{l-1} = dz * W_l, masked by the ReLU: activations at zero
            // (pre-activation <= 0) pass no gradient
            let mut dprev = vec![0.0; n * slot.cols];
            linalg::matmul_nn(&dcur, layout.weights(p, l), n, slot.rows, slot.cols, &mut dprev);
            for (dp, &a) in dprev.iter_mut().zip(below.iter()) {
                if a <= 0.0 {
                    *dp = 0.0;
                }
            }
            dcur = dprev;
        }
    }

    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite loss {loss}")));
    }
    let grad = ParamVector::new(grad)?;
    Ok((loss, grad))
}

/// Mean loss only (forward pass, no activation storage).
pub fn loss_only(layout: &MlpLayout, params: &ParamVector, batch: &BatchView) -> Result<f64> {
    evaluate(layout, params, batch).map(|(loss, _)| loss)
}

/// Mean loss and accuracy (forward only). Argmax ties resolve to the lowest
/// class index.
pub fn evaluate(layout: &MlpLayout, params: &ParamVector, batch: &BatchView) -> Result<(f64, f64)> {
    layout.check_params(params)?;
    check_batch(layout, batch)?;
    let p = params.values();
    let n = batch.n();
    let layers = layout.layer_count();

    let mut cur: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    for l in 0..layers {
        let input: &[f64] = if l == 0 { batch.inputs } else { &cur };
        layer_forward(layout, p, l, input, n, &mut next);
        if l + 1 < layers {
            relu_in_place(&mut next);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let logits = cur;

    let classes = layout.output_dim();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (i, &label) in batch.labels.iter().enumerate() {
        let z = &logits[i * classes..(i + 1) * classes];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|&zj| (zj - m).exp()).sum();
        loss_sum += sum.ln() - (z[label as usize] - m);
        let mut best = 0usize;
        for (j, &zj) in z.iter().enumerate() {
            if zj > z[best] {
                best = j;
            }
        }
        if best == label as usize {
            correct += 1;
        }
    }
    let loss = loss_sum / n as f64;
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite loss {loss}")));
    }
    Ok((loss, correct as f64 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_difference_gradient;

    fn spec(input: usize, width: usize, depth: usize, classes: usize, seed: u64) -> MlpSpec {
        MlpSpec {
            input_dim: input,
            hidden_width: width,
            hidden_layers: depth,
            output_dim: classes,
            init: InitScheme::KaimingUniform,
            seed,
        }
    }

    #[test]
    fn param_count_closed_form() {
        let layout = MlpLayout::new(&spec(784, 300, 1, 10, 0)).unwrap();
        assert_eq!(layout.param_count(), 238_510);
        // depth 3: 784*300+300 + 2*(300*300+300) + 300*10+10
        let layout = MlpLayout::new(&spec(784, 300, 3, 10, 0)).unwrap();
        assert_eq!(layout.param_count(), 235_500 + 2 * 90_300 + 3_010);
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(MlpLayout::new(&spec(0, 4, 1, 2, 0)).is_err());
        assert!(MlpLayout::new(&spec(4, 0, 1, 2, 0)).is_err());
        assert!(MlpLayout::new(&spec(4, 4, 0, 2, 0)).is_err());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let s = spec(12, 8, 2, 3, 42);
        let (_, a) = mlp_new(&s).unwrap();
        let (_, b) = mlp_new(&s).unwrap();
        assert_eq!(a, b);
        let mut other = s.clone();
        other.seed = 43;
        let (_, c) = mlp_new(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kaiming_bounds_and_zero_biases() {
        let s = spec(50, 20, 1, 10, 7);
        let (layout, params) = mlp_new(&s).unwrap();
        for slot in layout.slots() {
            let bound = (6.0 / slot.cols as f64).sqrt();
            let ws = &params.values()[slot.w_offset..slot.w_offset + slot.rows * slot.cols];
            assert!(ws.iter().all(|x| x.abs() < bound));
            let bs = &params.values()[slot.b_offset..slot.b_offset + slot.rows];
            assert!(bs.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn uniform_and_normal_ranges() {
        let mut rng = RngStream::new(3);
        let layout = MlpLayout::new(&spec(40, 30, 1, 10, 0)).unwrap();
        let u = init_params(&layout, InitScheme::Uniform, &mut rng);
        let ws = &u.values()[..40 * 30];
        assert!(ws.iter().all(|x| x.abs() < 0.1));

        let n = init_params(&layout, InitScheme::Normal, &mut rng);
        let ws = &n.values()[..40 * 30];
        let var: f64 = ws.iter().map(|x| x * x).sum::<f64>() / ws.len() as f64;
        let sd = var.sqrt();
        assert!((sd - 0.02).abs() < 0.002, "sample sd {sd}");
    }

    #[test]
    fn orthogonal_init_is_orthonormal() {
        let mut rng = RngStream::new(11);
        // wide layer (rows < cols): rows orthonormal
        let layout = MlpLayout::new(&spec(784, 300, 1, 10, 0)).unwrap();
        let p = init_params(&layout, InitScheme::Orthogonal, &mut rng);
        let slot = layout.slots()[0];
        let w = &p.values()[slot.w_offset..slot.w_offset + slot.rows * slot.cols];
        let mut max_dev: f64 = 0.0;
        for i in 0..slot.rows {
            for j in i..slot.rows {
                let d = linalg::dot_slices(
                    &w[i * slot.cols..(i + 1) * slot.cols],
                    &w[j * slot.cols..(j + 1) * slot.cols],
                );
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((d - target).abs());
            }
        }
        assert!(max_dev < 1e-6, "max deviation {max_dev}");

        // square hidden layer: full orthogonality both ways
        let layout = MlpLayout::new(&spec(32, 32, 1, 10, 0)).unwrap();
        let p = init_params(&layout, InitScheme::Orthogonal, &mut rng);
        let w = &p.values()[..32 * 32];
        for i in 0..32 {
            for j in 0..32 {
                let mut d = 0.0;
                for r in 0..32 {
                    d += w[r * 32 + i] * w[r * 32 + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-6, "col ({i},{j}) dev {}", d - target);
            }
        }
    }

    fn tiny_batch(n: usize, dim: usize, classes: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = RngStream::new(seed);
        let inputs: Vec<f64> = (0..n * dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_index(classes) as u8).collect();
        (inputs, labels)
    }

    #[test]
    fn zero_weights_give_log_classes_loss_and_tie_break_low() {
        let layout = MlpLayout::new(&spec(6, 4, 1, 10, 0)).unwrap();
        let params = ParamVector::zeros(layout.param_count());
        let (inputs, mut labels) = tiny_batch(9, 6, 10, 5);
        labels[0] = 0; // at least one example of the tie-break class
        let batch = BatchView::new(&inputs, &labels, 6).unwrap();
        let (loss, acc) = evaluate(&layout, &params, &batch).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12, "{loss}");
        // all logits equal -> everything predicted as class 0
        let zeros = labels.iter().filter(|&&l| l == 0).count();
        assert_eq!(acc, zeros as f64 / labels.len() as f64);
    }

    #[test]
    fn label_out_of_range_and_empty_batch_error() {
        let layout = MlpLayout::new(&spec(4, 4, 1, 3, 0)).unwrap();
        let params = ParamVector::zeros(layout.param_count());
        let inputs = vec![0.0; 8];
        let labels = vec![1u8, 3u8];
        let batch = BatchView::new(&inputs, &labels, 4).unwrap();
        let err = loss_and_grad(&layout, &params, &batch).unwrap_err();
        assert!(err.to_string().contains("label 3 at example 1"), "{err}");

        assert!(BatchView::new(&[], &[], 4).is_err());
    }

    #[test]
    fn softmax_guard_survives_large_logits() {
        let layout = MlpLayout::new(&spec(3, 4, 1, 5, 1)).unwrap();
        let (_, params) = mlp_new(&spec(3, 4, 1, 5, 1)).unwrap();
        let inputs = vec![1e4, -1e4, 5e3, 2e3, 1e4, -3e3];
        let labels = vec![0u8, 4u8];
        let batch = BatchView::new(&inputs, &labels, 3).unwrap();
        let (loss, grad) = loss_and_grad(&layout, &params, &batch).unwrap();
        assert!(loss.is_finite());
        assert!(grad.values().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let s = spec(7, 6, 2, 4, 99);
        let (layout, params) = mlp_new(&s).unwrap();
        let (inputs, labels) = tiny_batch(8, 7, 4, 17);
        let batch = BatchView::new(&inputs, &labels, 7).unwrap();
        let (_, grad) = loss_and_grad(&layout, &params, &batch).unwrap();

        let fd = finite_difference_gradient(
            |w| loss_only(&layout, w, &batch).expect("loss evaluates"),
            &params,
            1e-5,
        )
        .unwrap();
        let mut checked = 0;
        let mut rng = RngStream::new(23);
        for _ in 0..40 {
            let i = rng.gen_index(layout.param_count());
            let (a, b) = (grad.values()[i], fd.values()[i]);
            let denom = a.abs().max(b.abs()).max(1e-6);
            assert!((a - b).abs() / denom < 1e-4, "coord {i}: bp={a} fd={b}");
            checked += 1;
        }
        assert_eq!(checked, 40);
    }

    #[test]
    fn gradient_is_batch_mean() {
        // two batches concatenated: grad of the union = weighted mean
        let s = spec(5, 4, 1, 3, 8);
        let (layout, params) = mlp_new(&s).unwrap();
        let (inputs, labels) = tiny_batch(6, 5, 3, 31);
        let all = BatchView::new(&inputs, &labels, 5).unwrap();
        let half1 = BatchView::new(&inputs[..3 * 5], &labels[..3], 5).unwrap();
        let half2 = BatchView::new(&inputs[3 * 5..], &labels[3..], 5).unwrap();
        let (l, g) = loss_and_grad(&layout, &params, &all).unwrap();
        let (l1, g1) = loss_and_grad(&layout, &params, &half1).unwrap();
        let (l2, g2) = loss_and_grad(&layout, &params, &half2).unwrap();
        assert!((l - 0.5 * (l1 + l2)).abs() < 1e-12);
        for i in 0..g.len() {
            let mean = 0.5 * (g1.values()[i] + g2.values()[i]);
            assert!((g.values()[i] - mean).abs() < 1e-12);
        }
    }
}
