//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every forward op appends one node holding its output tensor and parent
//! ids; parents always precede children, so [`Tape::backward`] is a single
//! reverse sweep. One tape covers one loss computation; tapes are cheap and
//! thrown away after the gradient is read.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

use super::kernels;
use super::params::ParameterStore;
use super::tensor::Tensor;

/// Handle to a value on a tape. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param,
    /// Parents `[x, w, b]`; `x` is a vector or a row-major matrix.
    Linear,
    Relu,
    /// Per-row aggregation `self_weight * h_v + sum of neighbor rows`.
    NeighborSum { graph: Graph, self_weight: f64 },
    /// Mean of the given rows of a matrix; empty row set yields zeros.
    MeanRows { rows: Vec<usize> },
    /// Concatenation of the given rows, zero-padded to a fixed length.
    /// Rows may repeat; gradients accumulate per occurrence.
    ConcatRowsPad { rows: Vec<usize> },
    Concat,
    MeanVecs,
    /// Coordinate-wise max; gradient routed to the first parent attaining it.
    MaxVecs,
    Dot,
    SumElems,
    SoftmaxCe { label: usize },
    /// `|pred - target|` with subgradient 0 at the kink.
    AbsDiffConst { target: f64 },
    Sum,
    Scale { factor: f64 },
}

#[derive(Debug)]
struct Node {
    op: Op,
    parents: Vec<ValueId>,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_ids: BTreeMap<String, ValueId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, parents: Vec<ValueId>, value: Tensor) -> ValueId {
        self.nodes.push(Node { op, parents, value });
        ValueId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> ValueId {
        self.push(Op::Const, vec![], value)
    }

    /// Places a named parameter on the tape. Repeated requests for the same
    /// name return the same node, so its gradient accumulates across uses.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<ValueId> {
        if let Some(&id) = self.param_ids.get(name) {
            return Ok(id);
        }
        let value = store.get(name)?.clone();
        let id = self.push(Op::Param, vec![], value);
        self.param_ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn linear(&mut self, x: ValueId, w: ValueId, b: ValueId) -> Result<ValueId> {
        let (xs, ws, bs) = (
            self.value(x).shape().to_vec(),
            self.value(w).shape().to_vec(),
            self.value(b).shape().to_vec(),
        );
        if ws.len() != 2 || bs.len() != 1 || ws[0] != bs[0] {
            return Err(Error::contract(format!(
                "linear expects weight [out x in] with matching bias, got {ws:?} / {bs:?}"
            )));
        }
        let (out_dim, in_dim) = (ws[0], ws[1]);
        let value = match xs.as_slice() {
            [d] if *d == in_dim => Tensor::vector(kernels::linear_vec(
                self.value(w).data(),
                self.value(b).data(),
                self.value(x).data(),
                out_dim,
                in_dim,
            )),
            [n, d] if *d == in_dim => Tensor::matrix(
                *n,
                out_dim,
                kernels::linear_rows(
                    self.value(w).data(),
                    self.value(b).data(),
                    self.value(x).data(),
                    *n,
                    in_dim,
                    out_dim,
                ),
            )?,
            _ => {
                return Err(Error::contract(format!(
                    "linear input shape {xs:?} does not match weight {ws:?}"
                )))
            }
        };
        Ok(self.push(Op::Linear, vec![x, w, b], value))
    }

    pub fn relu(&mut self, x: ValueId) -> ValueId {
        let value = Tensor::new(
            self.value(x).shape().to_vec(),
            kernels::relu(self.value(x).data()),
        )
        .expect("same shape");
        self.push(Op::Relu, vec![x], value)
    }

    pub fn neighbor_sum(&mut self, graph: &Graph, h: ValueId, self_weight: f64) -> Result<ValueId> {
        let shape = self.value(h).shape().to_vec();
        if shape.len() != 2 || shape[0] != graph.node_count() {
            return Err(Error::contract(format!(
                "neighbor_sum expects [{} x d] embeddings, got {shape:?}",
                graph.node_count()
            )));
        }
        let d = shape[1];
        let value = Tensor::matrix(
            shape[0],
            d,
            kernels::neighbor_sum(graph, self.value(h).data(), d, self_weight),
        )?;
        Ok(self.push(
            Op::NeighborSum {
                graph: graph.clone(),
                self_weight,
            },
            vec![h],
            value,
        ))
    }

    pub fn mean_rows(&mut self, z: ValueId, rows: &[usize]) -> Result<ValueId> {
        let (n, k) = self.matrix_dims(z, "mean_rows")?;
        self.check_rows(rows, n)?;
        let mut out = vec![0.0; k];
        for &r in rows {
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += self.value(z).data()[r * k + c];
            }
        }
        if !rows.is_empty() {
            let inv = 1.0 / rows.len() as f64;
            for slot in &mut out {
                *slot *= inv;
            }
        }
        Ok(self.push(
            Op::MeanRows { rows: rows.to_vec() },
            vec![z],
            Tensor::vector(out),
        ))
    }

    pub fn concat_rows_padded(&mut self, z: ValueId, rows: &[usize], total_len: usize) -> Result<ValueId> {
        let (n, k) = self.matrix_dims(z, "concat_rows_padded")?;
        self.check_rows(rows, n)?;
        if rows.len() * k > total_len {
            return Err(Error::contract(format!(
                "{} rows of width {k} exceed pad target {total_len}",
                rows.len()
            )));
        }
        let mut out = vec![0.0; total_len];
        for (i, &r) in rows.iter().enumerate() {
            out[i * k..(i + 1) * k].copy_from_slice(&self.value(z).data()[r * k..(r + 1) * k]);
        }
        Ok(self.push(
            Op::ConcatRowsPad { rows: rows.to_vec() },
            vec![z],
            Tensor::vector(out),
        ))
    }

    pub fn concat(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        self.push(Op::Concat, vec![a, b], Tensor::vector(data))
    }

    pub fn mean_vecs(&mut self, ids: &[ValueId]) -> Result<ValueId> {
        self.check_uniform(ids, "mean_vecs")?;
        let len = self.value(ids[0]).len();
        let mut out = vec![0.0; len];
        for &id in ids {
            for (slot, x) in out.iter_mut().zip(self.value(id).data()) {
                *slot += x;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        for slot in &mut out {
            *slot *= inv;
        }
        Ok(self.push(Op::MeanVecs, ids.to_vec(), Tensor::vector(out)))
    }

    pub fn max_vecs(&mut self, ids: &[ValueId]) -> Result<ValueId> {
        self.check_uniform(ids, "max_vecs")?;
        let mut out = self.value(ids[0]).data().to_vec();
        for &id in &ids[1..] {
            for (slot, &x) in out.iter_mut().zip(self.value(id).data()) {
                if x > *slot {
                    *slot = x;
                }
            }
        }
        Ok(self.push(Op::MaxVecs, ids.to_vec(), Tensor::vector(out)))
    }

    pub fn dot(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.value(a).len() != self.value(b).len() {
            return Err(Error::contract("dot operands differ in length".to_string()));
        }
        let v = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot, vec![a, b], Tensor::scalar(v)))
    }

    pub fn sum_elems(&mut self, x: ValueId) -> ValueId {
        let v = self.value(x).data().iter().sum();
        self.push(Op::SumElems, vec![x], Tensor::scalar(v))
    }

    pub fn softmax_cross_entropy(&mut self, logits: ValueId, label: usize) -> Result<ValueId> {
        let len = self.value(logits).len();
        if label >= len {
            return Err(Error::input(format!(
                "class label {label} out of range for {len} logits"
            )));
        }
        let v = kernels::softmax_ce(self.value(logits).data(), label);
        Ok(self.push(Op::SoftmaxCe { label }, vec![logits], Tensor::scalar(v)))
    }

    pub fn abs_diff_const(&mut self, pred: ValueId, target: f64) -> Result<ValueId> {
        let p = self.value(pred).item()?;
        Ok(self.push(
            Op::AbsDiffConst { target },
            vec![pred],
            Tensor::scalar((p - target).abs()),
        ))
    }

    pub fn sum(&mut self, ids: &[ValueId]) -> Result<ValueId> {
        if ids.is_empty() {
            return Err(Error::contract("sum over no values".to_string()));
        }
        let mut acc = 0.0;
        for &id in ids {
            acc += self.value(id).item()?;
        }
        Ok(self.push(Op::Sum, ids.to_vec(), Tensor::scalar(acc)))
    }

    pub fn scale(&mut self, x: ValueId, factor: f64) -> ValueId {
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(Op::Scale { factor }, vec![x], value)
    }

    /// Reverse sweep from a scalar root. Returns gradients for every
    /// parameter placed on this tape; parameters the root does not reach
    /// get zero gradients.
    pub fn backward(&self, root: ValueId) -> Result<BTreeMap<String, Tensor>> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[root.0][0] = 1.0;

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let g = grads[i].clone();
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            match &node.op {
                Op::Const | Op::Param => {}
                Op::Linear => {
                    let (x, w, _) = (node.parents[0], node.parents[1], node.parents[2]);
                    let (out_dim, in_dim) = {
                        let ws = self.value(w).shape();
                        (ws[0], ws[1])
                    };
                    let rows = self.value(x).len() / in_dim;
                    let xv = self.value(x).data().to_vec();
                    let wv = self.value(w).data().to_vec();
                    for r in 0..rows {
                        let gr = &g[r * out_dim..(r + 1) * out_dim];
                        let xr = &xv[r * in_dim..(r + 1) * in_dim];
                        {
                            let gx = &mut grads[node.parents[0].0];
                            for o in 0..out_dim {
                                for i2 in 0..in_dim {
                                    gx[r * in_dim + i2] += gr[o] * wv[o * in_dim + i2];
                                }
                            }
                        }
                        {
                            let gw = &mut grads[node.parents[1].0];
                            for o in 0..out_dim {
                                for (i2, xi) in xr.iter().enumerate() {
                                    gw[o * in_dim + i2] += gr[o] * xi;
                                }
                            }
                        }
                        {
                            let gb = &mut grads[node.parents[2].0];
                            for (o, go) in gr.iter().enumerate() {
                                gb[o] += go;
                            }
                        }
                    }
                }
                Op::Relu => {
                    let xv = self.value(node.parents[0]).data().to_vec();
                    let gx = &mut grads[node.parents[0].0];
                    for (i2, (&go, &xi)) in g.iter().zip(&xv).enumerate() {
                        if xi > 0.0 {
                            gx[i2] += go;
                        }
                    }
                }
                Op::NeighborSum { graph, self_weight } => {
                    let d = node.value.cols();
                    let gx = &mut grads[node.parents[0].0];
                    for v in 0..graph.node_count() {
                        for c in 0..d {
                            gx[v * d + c] += self_weight * g[v * d + c];
                        }
                        for &u in graph.adj(v) {
                            for c in 0..d {
                                gx[v * d + c] += g[u * d + c];
                            }
                        }
                    }
                }
                Op::MeanRows { rows } => {
                    if !rows.is_empty() {
                        let k = node.value.len();
                        let inv = 1.0 / rows.len() as f64;
                        let gz = &mut grads[node.parents[0].0];
                        for &r in rows {
                            for c in 0..k {
                                gz[r * k + c] += g[c] * inv;
                            }
                        }
                    }
                }
                Op::ConcatRowsPad { rows } => {
                    let k = self.value(node.parents[0]).cols();
                    let gz = &mut grads[node.parents[0].0];
                    for (i2, &r) in rows.iter().enumerate() {
                        for c in 0..k {
                            gz[r * k + c] += g[i2 * k + c];
                        }
                    }
                }
                Op::Concat => {
                    let split = self.value(node.parents[0]).len();
                    for (i2, &go) in g.iter().enumerate() {
                        if i2 < split {
                            grads[node.parents[0].0][i2] += go;
                        } else {
                            grads[node.parents[1].0][i2 - split] += go;
                        }
                    }
                }
                Op::MeanVecs => {
                    let inv = 1.0 / node.parents.len() as f64;
                    for &p in &node.parents {
                        for (slot, &go) in grads[p.0].iter_mut().zip(&g) {
                            *slot += go * inv;
                        }
                    }
                }
                Op::MaxVecs => {
                    let out = node.value.data().to_vec();
                    for (c, (&go, &m)) in g.iter().zip(&out).enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        for &p in &node.parents {
                            if self.value(p).data()[c] == m {
                                grads[p.0][c] += go;
                                break;
                            }
                        }
                    }
                }
                Op::Dot => {
                    let av = self.value(node.parents[0]).data().to_vec();
                    let bv = self.value(node.parents[1]).data().to_vec();
                    for (slot, &b) in grads[node.parents[0].0].iter_mut().zip(&bv) {
                        *slot += g[0] * b;
                    }
                    for (slot, &a) in grads[node.parents[1].0].iter_mut().zip(&av) {
                        *slot += g[0] * a;
                    }
                }
                Op::SumElems => {
                    for slot in grads[node.parents[0].0].iter_mut() {
                        *slot += g[0];
                    }
                }
                Op::SoftmaxCe { label } => {
                    let probs = kernels::softmax(self.value(node.parents[0]).data());
                    let gl = &mut grads[node.parents[0].0];
                    for (c, p) in probs.into_iter().enumerate() {
                        let onehot = if c == *label { 1.0 } else { 0.0 };
                        gl[c] += (p - onehot) * g[0];
                    }
                }
                Op::AbsDiffConst { target } => {
                    let p = self.value(node.parents[0]).data()[0];
                    let sign = if p > *target {
                        1.0
                    } else if p < *target {
                        -1.0
                    } else {
                        0.0
                    };
                    grads[node.parents[0].0][0] += sign * g[0];
                }
                Op::Sum => {
                    for &p in &node.parents {
                        grads[p.0][0] += g[0];
                    }
                }
                Op::Scale { factor } => {
                    for (slot, &go) in grads[node.parents[0].0].iter_mut().zip(&g) {
                        *slot += factor * go;
                    }
                }
            }
        }

        let mut out = BTreeMap::new();
        for (name, id) in &self.param_ids {
            let shape = self.value(*id).shape().to_vec();
            out.insert(name.clone(), Tensor::new(shape, grads[id.0].clone())?);
        }
        Ok(out)
    }

    fn matrix_dims(&self, id: ValueId, what: &str) -> Result<(usize, usize)> {
        let shape = self.value(id).shape();
        if shape.len() != 2 {
            return Err(Error::contract(format!(
                "{what} expects a matrix, got shape {shape:?}"
            )));
        }
        Ok((shape[0], shape[1]))
    }

    fn check_rows(&self, rows: &[usize], n: usize) -> Result<()> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::contract(format!("row {bad} outside [0, {n})")));
        }
        Ok(())
    }

    fn check_uniform(&self, ids: &[ValueId], what: &str) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::contract(format!("{what} over no values")));
        }
        let first = self.value(ids[0]).shape();
        for &id in &ids[1..] {
            if self.value(id).shape() != first {
                return Err(Error::contract(format!("{what} operands differ in shape")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, t: Tensor) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert(name, t).unwrap();
        s
    }

    #[test]
    fn linear_identity_plus_bias() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![2.0, 3.0]));
        let w = tape.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.constant(Tensor::vector(vec![1.0, 1.0]));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 4.0]);
    }

    #[test]
    fn linear_zero_weights() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![5.0, -2.0, 7.0]));
        let w = tape.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = tape.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let w = tape.constant(Tensor::matrix(3, 2, vec![0.0; 6]).unwrap());
        let b = tape.constant(Tensor::vector(vec![0.0; 3]));
        assert!(matches!(tape.linear(x, w, b), Err(Error::Contract(_))));
    }

    #[test]
    fn square_gradient() {
        let store = store_with("theta", Tensor::scalar(3.0));
        let mut tape = Tape::new();
        let t = tape.param(&store, "theta").unwrap();
        let sq = tape.dot(t, t).unwrap();
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads["theta"].data(), &[6.0]);
    }

    #[test]
    fn chain_rule_sum_of_linear() {
        let w_data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let store = store_with("x", Tensor::vector(vec![0.5, -1.5]));
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        let w = tape.constant(Tensor::matrix(3, 2, w_data.clone()).unwrap());
        let b = tape.constant(Tensor::vector(vec![0.0; 3]));
        let y = tape.linear(x, w, b).unwrap();
        let s = tape.sum_elems(y);
        let grads = tape.backward(s).unwrap();
        // d(sum Wx)/dx_i = sum over output rows of column i.
        assert_eq!(grads["x"].data(), &[1.0 + 3.0 + 5.0, 2.0 + 4.0 + 6.0]);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let store = store_with("x", Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new();
        let x = tape.param(&store, "x").unwrap();
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unreached_param_gets_zero_gradient() {
        let mut store = ParameterStore::new();
        store.insert("used", Tensor::scalar(2.0)).unwrap();
        store.insert("unused", Tensor::vector(vec![1.0, 1.0])).unwrap();
        let mut tape = Tape::new();
        let u = tape.param(&store, "used").unwrap();
        let _ = tape.param(&store, "unused").unwrap();
        let root = tape.dot(u, u).unwrap();
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads["unused"].data(), &[0.0, 0.0]);
        assert_eq!(grads["used"].data(), &[4.0]);
    }

    #[test]
    fn concat_rows_accumulates_repeated_rows() {
        let store = store_with("z", Tensor::matrix(3, 2, vec![1.0; 6]).unwrap());
        let mut tape = Tape::new();
        let z = tape.param(&store, "z").unwrap();
        let w = tape.concat_rows_padded(z, &[1, 0, 1], 8).unwrap();
        assert_eq!(tape.value(w).data(), &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let s = tape.sum_elems(w);
        let grads = tape.backward(s).unwrap();
        // Row 1 appears twice in the walk, so its gradient doubles.
        assert_eq!(grads["z"].data(), &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn mean_rows_empty_is_zero_vector() {
        let store = store_with("z", Tensor::matrix(2, 3, vec![9.0; 6]).unwrap());
        let mut tape = Tape::new();
        let z = tape.param(&store, "z").unwrap();
        let m = tape.mean_rows(z, &[]).unwrap();
        assert_eq!(tape.value(m).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_ce_gradient_is_probs_minus_onehot() {
        let store = store_with("logits", Tensor::vector(vec![0.0, 0.0]));
        let mut tape = Tape::new();
        let l = tape.param(&store, "logits").unwrap();
        let loss = tape.softmax_cross_entropy(l, 0).unwrap();
        assert!((tape.value(loss).item().unwrap() - 2.0_f64.ln()).abs() < 1e-12);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads["logits"].data(), &[-0.5, 0.5]);
    }

    #[test]
    fn abs_diff_subgradient_zero_at_kink() {
        let store = store_with("p", Tensor::scalar(1.5));
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let l = tape.abs_diff_const(p, 1.5).unwrap();
        let grads = tape.backward(l).unwrap();
        assert_eq!(grads["p"].data(), &[0.0]);
    }

    #[test]
    fn max_vecs_routes_gradient_to_first_attainer() {
        let mut store = ParameterStore::new();
        store.insert("a", Tensor::vector(vec![1.0, 5.0])).unwrap();
        store.insert("b", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, "a").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let m = tape.max_vecs(&[a, b]).unwrap();
        assert_eq!(tape.value(m).data(), &[1.0, 5.0]);
        let s = tape.sum_elems(m);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads["a"].data(), &[1.0, 1.0]);
        assert_eq!(grads["b"].data(), &[0.0, 0.0]);
    }
}
