//! Dense row-major kernels for the model code.
//!
//! Determinism contract: for fixed inputs every kernel produces identical
//! bits regardless of rayon thread count. Parallelism is only ever over
//! disjoint output rows (each computed by a pure serial loop), or over a
//! *fixed-size* chunking of the contracted dimension reduced in chunk order.

use rayon::prelude::*;

/// Dot product with four independent accumulators. The fixed summation
/// structure is part of the determinism contract; it also lets LLVM keep
/// several FMA chains in flight.
pub(crate) fn dot_slices(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let mut xc = x.chunks_exact(4);
    let mut yc = y.chunks_exact(4);
    for (a, b) in (&mut xc).zip(&mut yc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let mut tail = 0.0;
    for (a, b) in xc.remainder().iter().zip(yc.remainder()) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `dst += s * src`.
pub(crate) fn add_scaled(dst: &mut [f64], s: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, x) in dst.iter_mut().zip(src) {
        *d += s * x;
    }
}

// Shapes below this many multiply-adds run serially; rayon setup costs more
// than it saves. Threshold depends only on the shape, so it cannot introduce
// run-to-run differences.
const PAR_THRESHOLD: usize = 1 << 16;

/// `c (m x n) = a (m x k) * b^T` where `b` is `n x k` row-major:
/// `c[i][j] = dot(a_row_i, b_row_j)`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    let row = |ci: &mut [f64], i: usize| {
        let ar = &a[i * k..(i + 1) * k];
        for (j, cij) in ci.iter_mut().enumerate() {
            *cij = dot_slices(ar, &b[j * k..(j + 1) * k]);
        }
    };
    if m * k * n < PAR_THRESHOLD {
        for (i, ci) in c.chunks_exact_mut(n).enumerate() {
            row(ci, i);
        }
    } else {
        c.par_chunks_exact_mut(n)
            .enumerate()
            .for_each(|(i, ci)| row(ci, i));
    }
}

/// `c (m x n) = a (m x k) * b (k x n)`, both row-major.
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |ci: &mut [f64], i: usize| {
        ci.fill(0.0);
        for p in 0..k {
            add_scaled(ci, a[i * k + p], &b[p * n..(p + 1) * n]);
        }
    };
    if m * k * n < PAR_THRESHOLD {
        for (i, ci) in c.chunks_exact_mut(n).enumerate() {
            row(ci, i);
        }
    } else {
        c.par_chunks_exact_mut(n)
            .enumerate()
            .for_each(|(i, ci)| row(ci, i));
    }
}

// Row-chunk size for the transposed product. Fixed so the reduction tree is
// identical no matter how many workers run.
const TN_CHUNK: usize = 512;

/// `c (m x n) = a^T * b` where `a` is `k x m` and `b` is `k x n` row-major:
/// `c[i][:] = sum_p a[p][i] * b[p][:]`.
///
/// The contracted dimension `k` (the batch) is split into fixed chunks;
/// partial products are computed per chunk and summed in chunk order.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let chunk_of = |lo: usize, hi: usize| {
        let mut part = vec![0.0f64; m * n];
        for p in lo..hi {
            let br = &b[p * n..(p + 1) * n];
            for i in 0..m {
                add_scaled(&mut part[i * n..(i + 1) * n], a[p * m + i], br);
            }
        }
        part
    };
    c.fill(0.0);
    if k * m * n < PAR_THRESHOLD || k <= TN_CHUNK {
        let part = chunk_of(0, k);
        c.copy_from_slice(&part);
    } else {
        let bounds: Vec<(usize, usize)> = (0..k)
            .step_by(TN_CHUNK)
            .map(|lo| (lo, (lo + TN_CHUNK).min(k)))
            .collect();
        let parts: Vec<Vec<f64>> = bounds
            .par_iter()
            .map(|&(lo, hi)| chunk_of(lo, hi))
            .collect();
        for part in parts {
            for (ci, pi) in c.iter_mut().zip(&part) {
                *ci += pi;
            }
        }
    }
}
