//! The fixed network blocks: a GIN-style message passer and plain MLPs.
//!
//! Each block exists in two forms: a taped forward for training and a
//! plain forward for gradient-free evaluation (action scoring, rewards,
//! inference). Both call the same kernels, so their outputs are bitwise
//! identical.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatureMatrix};

use super::kernels;
use super::params::ParameterStore;
use super::tape::{Tape, ValueId};
use super::tensor::Tensor;

/// Architecture of a message-passing stack: `layers` GIN layers, each an
/// internal two-linear MLP, with a rectifier between consecutive layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MpnnSpec {
    pub layers: usize,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Weight on a node's own embedding in the aggregation, `1 + eps0`.
    /// Fixed, not learned.
    pub self_weight: f64,
}

impl MpnnSpec {
    pub fn new(layers: usize, in_dim: usize, hidden_dim: usize, out_dim: usize) -> Result<Self> {
        if layers == 0 || in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
            return Err(Error::input(
                "message passer needs at least one layer and positive dims".to_string(),
            ));
        }
        Ok(MpnnSpec {
            layers,
            in_dim,
            hidden_dim,
            out_dim,
            self_weight: 1.0,
        })
    }

    /// Input/output width of layer `i`; interior layers keep hidden width.
    fn layer_io(&self, i: usize) -> (usize, usize) {
        let din = if i == 0 { self.in_dim } else { self.hidden_dim };
        let dout = if i + 1 == self.layers {
            self.out_dim
        } else {
            self.hidden_dim
        };
        (din, dout)
    }
}

/// Feedforward architecture: linear layers with rectifiers between them,
/// none after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub out_dim: usize,
}

impl MlpSpec {
    pub fn new(in_dim: usize, hidden_dims: Vec<usize>, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::input("feedforward dims must be positive".to_string()));
        }
        Ok(MlpSpec {
            in_dim,
            hidden_dims,
            out_dim,
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim];
        d.extend(&self.hidden_dims);
        d.push(self.out_dim);
        d
    }

    pub fn layer_count(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

fn xavier(rng: &mut impl Rng, out_dim: usize, in_dim: usize) -> Tensor {
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let data = (0..out_dim * in_dim)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor::matrix(out_dim, in_dim, data).expect("sized to shape")
}

/// Registers the parameters of a message passer under
/// `{prefix}.gin{i}.{w1,b1,w2,b2}`. Weights are uniform Xavier, biases zero.
pub fn init_mpnn(
    store: &mut ParameterStore,
    prefix: &str,
    spec: &MpnnSpec,
    rng: &mut impl Rng,
) -> Result<()> {
    for i in 0..spec.layers {
        let (din, dout) = spec.layer_io(i);
        store.insert(&format!("{prefix}.gin{i}.w1"), xavier(rng, spec.hidden_dim, din))?;
        store.insert(
            &format!("{prefix}.gin{i}.b1"),
            Tensor::zeros(vec![spec.hidden_dim]),
        )?;
        store.insert(&format!("{prefix}.gin{i}.w2"), xavier(rng, dout, spec.hidden_dim))?;
        store.insert(&format!("{prefix}.gin{i}.b2"), Tensor::zeros(vec![dout]))?;
    }
    Ok(())
}

/// Registers the parameters of a feedforward net under
/// `{prefix}.lin{i}.{w,b}`.
pub fn init_mlp(
    store: &mut ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    rng: &mut impl Rng,
) -> Result<()> {
    let dims = spec.dims();
    for i in 0..spec.layer_count() {
        store.insert(&format!("{prefix}.lin{i}.w"), xavier(rng, dims[i + 1], dims[i]))?;
        store.insert(&format!("{prefix}.lin{i}.b"), Tensor::zeros(vec![dims[i + 1]]))?;
    }
    Ok(())
}

/// One GIN layer on the tape: aggregate self plus neighbors, then the
/// layer's internal MLP, row-wise.
pub fn gin_layer(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    layer: usize,
    spec: &MpnnSpec,
    graph: &Graph,
    h: ValueId,
) -> Result<ValueId> {
    let agg = tape.neighbor_sum(graph, h, spec.self_weight)?;
    let w1 = tape.param(store, &format!("{prefix}.gin{layer}.w1"))?;
    let b1 = tape.param(store, &format!("{prefix}.gin{layer}.b1"))?;
    let w2 = tape.param(store, &format!("{prefix}.gin{layer}.w2"))?;
    let b2 = tape.param(store, &format!("{prefix}.gin{layer}.b2"))?;
    let a1 = tape.linear(agg, w1, b1)?;
    let a1 = tape.relu(a1);
    tape.linear(a1, w2, b2)
}

/// Full message passer on the tape: node features in, `n x out_dim`
/// embeddings out.
pub fn mpnn_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    spec: &MpnnSpec,
    graph: &Graph,
    x: &NodeFeatureMatrix,
) -> Result<ValueId> {
    if x.cols() != spec.in_dim {
        return Err(Error::contract(format!(
            "feature width {} does not match configured input dim {}",
            x.cols(),
            spec.in_dim
        )));
    }
    if x.rows() != graph.node_count() {
        return Err(Error::contract(format!(
            "feature rows {} do not match node count {}",
            x.rows(),
            graph.node_count()
        )));
    }
    let mut h = tape.constant(Tensor::matrix(x.rows(), x.cols(), x.data().to_vec())?);
    for i in 0..spec.layers {
        h = gin_layer(tape, store, prefix, i, spec, graph, h)?;
        if i + 1 < spec.layers {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Feedforward net on the tape over a vector input.
pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    x: ValueId,
) -> Result<ValueId> {
    let mut h = x;
    for i in 0..spec.layer_count() {
        let w = tape.param(store, &format!("{prefix}.lin{i}.w"))?;
        let b = tape.param(store, &format!("{prefix}.lin{i}.b"))?;
        h = tape.linear(h, w, b)?;
        if i + 1 < spec.layer_count() {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Gradient-free message passer; bitwise equal to the taped forward.
pub fn mpnn_forward_plain(
    store: &ParameterStore,
    prefix: &str,
    spec: &MpnnSpec,
    graph: &Graph,
    x: &NodeFeatureMatrix,
) -> Result<Tensor> {
    if x.cols() != spec.in_dim || x.rows() != graph.node_count() {
        return Err(Error::contract(format!(
            "feature matrix {}x{} does not fit graph of {} nodes with input dim {}",
            x.rows(),
            x.cols(),
            graph.node_count(),
            spec.in_dim
        )));
    }
    let n = graph.node_count();
    let mut h = x.data().to_vec();
    let mut width = spec.in_dim;
    for i in 0..spec.layers {
        let (din, dout) = spec.layer_io(i);
        let agg = kernels::neighbor_sum(graph, &h, width, spec.self_weight);
        let w1 = store.get(&format!("{prefix}.gin{i}.w1"))?;
        let b1 = store.get(&format!("{prefix}.gin{i}.b1"))?;
        let w2 = store.get(&format!("{prefix}.gin{i}.w2"))?;
        let b2 = store.get(&format!("{prefix}.gin{i}.b2"))?;
        let a1 = kernels::linear_rows(w1.data(), b1.data(), &agg, n, din, spec.hidden_dim);
        let a1 = kernels::relu(&a1);
        h = kernels::linear_rows(w2.data(), b2.data(), &a1, n, spec.hidden_dim, dout);
        if i + 1 < spec.layers {
            h = kernels::relu(&h);
        }
        width = dout;
    }
    Tensor::matrix(n, spec.out_dim, h)
}

/// Gradient-free feedforward net; bitwise equal to the taped forward.
pub fn mlp_forward_plain(
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    x: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != spec.in_dim {
        return Err(Error::contract(format!(
            "input length {} does not match configured dim {}",
            x.len(),
            spec.in_dim
        )));
    }
    let dims = spec.dims();
    let mut h = x.to_vec();
    for i in 0..spec.layer_count() {
        let w = store.get(&format!("{prefix}.lin{i}.w"))?;
        let b = store.get(&format!("{prefix}.lin{i}.b"))?;
        h = kernels::linear_vec(w.data(), b.data(), &h, dims[i + 1], dims[i]);
        if i + 1 < spec.layer_count() {
            h = kernels::relu(&h);
        }
    }
    Ok(h)
}
