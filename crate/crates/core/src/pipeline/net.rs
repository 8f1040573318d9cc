//! Dense-layer arithmetic over flattened parameter slices.

use rayon::prelude::*;

use super::weights::DenseShape;
use crate::rng::RngStream;

/// `out = W x + b` for a layer stored as `[W (outputs × inputs, row-major), b]`.
pub(crate) fn dense_forward(params: &[f64], shape: DenseShape, x: &[f64], out: &mut [f64]) {
    let (w, b) = params.split_at(shape.inputs * shape.outputs);
    for (o, y) in out.iter_mut().enumerate() {
        let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
        *y = b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// Accumulates `dW += delta ⊗ x`, `db += delta` into a gradient slice laid
/// out like the layer's parameters.
pub(crate) fn dense_accumulate(grad: &mut [f64], shape: DenseShape, x: &[f64], delta: &[f64]) {
    let (gw, gb) = grad.split_at_mut(shape.inputs * shape.outputs);
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut gw[o * shape.inputs..(o + 1) * shape.inputs];
        for (g, &xi) in row.iter_mut().zip(x) {
            *g += d * xi;
        }
        gb[o] += d;
    }
}

/// `dx = Wᵀ delta`.
pub(crate) fn dense_backward_input(params: &[f64], shape: DenseShape, delta: &[f64], dx: &mut [f64]) {
    dx.iter_mut().for_each(|v| *v = 0.0);
    for (o, &d) in delta.iter().enumerate() {
        let row = &params[o * shape.inputs..(o + 1) * shape.inputs];
        for (v, &w) in dx.iter_mut().zip(row) {
            *v += w * d;
        }
    }
}

/// Numerically stable softmax in place.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// `-ln softmax(z)[label]`.
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Uniform initialisation in `[-a, a]` with `a = init_scale · sqrt(3 / fan_in)`
/// for weights, zeros for biases, drawn layer by layer from one stream.
pub(crate) fn init_params(shapes: &[DenseShape], init_scale: f64, rng: RngStream) -> Vec<f64> {
    let mut g = rng.generator();
    let mut out = Vec::with_capacity(shapes.iter().map(DenseShape::param_count).sum());
    for s in shapes {
        let a = init_scale * (3.0 / s.inputs as f64).sqrt();
        out.extend((0..s.inputs * s.outputs).map(|_| g.uniform_range(-a, a)));
        out.extend(std::iter::repeat_n(0.0, s.outputs));
    }
    out
}

/// Sum of per-chunk `(loss, gradient)` contributions over `0..n`.
///
/// Chunks have a fixed size and are reduced in index order, so the result is
/// bitwise independent of the number of worker threads.
pub(crate) fn chunked_gradient<F>(n: usize, dim: usize, f: F) -> (f64, Vec<f64>)
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) -> f64 + Sync,
{
    const CHUNK: usize = 256;
    let parts: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut g = vec![0.0; dim];
            let loss = f(c * CHUNK..((c + 1) * CHUNK).min(n), &mut g);
            (loss, g)
        })
        .collect();
    let mut grad = vec![0.0; dim];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    (loss, grad)
}
