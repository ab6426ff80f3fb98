//! Shared numeric kernels. Both the taped and the plain (gradient-free)
//! forward paths call these, so the two paths produce bitwise identical
//! values for identical inputs.

use crate::graph::Graph;

/// `W x + b` with `W` row-major `[out_dim x in_dim]`.
pub(crate) fn linear_vec(w: &[f64], b: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.push(acc);
    }
    out
}

/// Row-wise `W x + b` over a row-major `[n x in_dim]` matrix.
pub(crate) fn linear_rows(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    n: usize,
    in_dim: usize,
    out_dim: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * out_dim);
    for r in 0..n {
        out.extend(linear_vec(w, b, &x[r * in_dim..(r + 1) * in_dim], out_dim, in_dim));
    }
    out
}

pub(crate) fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Per node `v`: `self_weight * H(v,:) + sum over neighbors u of H(u,:)`.
pub(crate) fn neighbor_sum(g: &Graph, h: &[f64], d: usize, self_weight: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; n * d];
    for v in 0..n {
        let row = &mut out[v * d..(v + 1) * d];
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = self_weight * h[v * d + c];
        }
        for &u in g.adj(v) {
            for c in 0..d {
                out[v * d + c] += h[u * d + c];
            }
        }
    }
    out
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `-log softmax(logits)[label]`, computed via the log-sum-exp identity.
pub(crate) fn softmax_ce(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&x| (x - m).exp()).sum::<f64>().ln() + m;
    lse - logits[label]
}
