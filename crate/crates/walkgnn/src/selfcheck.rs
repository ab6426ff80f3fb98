//! Finite-difference verification of every differentiable block. Run by
//! the `grad-check` command and the acceptance suite.
//!
//! The trajectory loss is checked in two configurations because its
//! Bellman targets are deliberately gradient-free: with discount 0 the
//! targets are the (constant) rewards, so the embedder and policy net can
//! be perturbed jointly; with discount 0.9 the targets depend on the
//! embedder and target net but not the policy net, so only the policy net
//! is perturbed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{rollout, trajectory_loss, AgentPair, RolloutMode, Trajectory, POLICY_PREFIX};
use crate::env::{EnvConfig, EnvState, MdpKind, RewardEvaluator};
use crate::error::Result;
use crate::graph::{Graph, NodeFeatureMatrix};
use crate::nn::blocks::{gin_layer, init_mlp, init_mpnn, mlp_forward, mpnn_forward, MlpSpec, MpnnSpec};
use crate::nn::gradcheck::finite_difference_check;
use crate::nn::params::ParameterStore;
use crate::nn::tape::Tape;
use crate::nn::tensor::Tensor;

pub const REL_ERR_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub block: &'static str,
    pub max_rel_err: f64,
}

impl BlockReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < REL_ERR_THRESHOLD
    }
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    // Path backbone keeps it connected; extra chords vary the topology.
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
    for _ in 0..n / 2 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, &edges).expect("no self-loops by construction")
}

pub fn random_features(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> NodeFeatureMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NodeFeatureMatrix::new(rows, cols, data).expect("sized to shape")
}

// The trained initializers zero the biases, which lets dead-unit cascades
// park pre-activations exactly on the relu kink where central differences
// are ill-defined. Check instances use dense random values instead.
pub fn randomize_all(store: &mut ParameterStore, rng: &mut ChaCha8Rng) -> Result<()> {
    for name in store.names() {
        let len = store.get(&name)?.len();
        for i in 0..len {
            store.set_coord(&name, i, rng.gen_range(-0.7..0.7))?;
        }
    }
    Ok(())
}

const FD_STEP: f64 = 1e-5;

type LossFn = Box<dyn Fn(&ParameterStore) -> Result<(f64, BTreeMap<String, Tensor>)>>;

struct BlockInstance {
    store: ParameterStore,
    names: Vec<String>,
    f: LossFn,
}

fn gin_layer_instance(seed: u64) -> Result<BlockInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, 6);
    let spec = MpnnSpec::new(1, 3, 5, 4)?;
    let mut store = ParameterStore::new();
    init_mpnn(&mut store, "g", &spec, &mut rng)?;
    randomize_all(&mut store, &mut rng)?;
    let x = random_features(&mut rng, 6, 3);
    let names = store.names();
    let f: LossFn = Box::new(move |s: &ParameterStore| {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::matrix(x.rows(), x.cols(), x.data().to_vec())?);
        let out = gin_layer(&mut tape, s, "g", 0, &spec, &g, h)?;
        let loss = tape.sum_elems(out);
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).item()?, grads))
    });
    Ok(BlockInstance { store, names, f })
}

fn mpnn_instance(seed: u64) -> Result<BlockInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, 7);
    let spec = MpnnSpec::new(3, 2, 4, 3)?;
    let mut store = ParameterStore::new();
    init_mpnn(&mut store, "m", &spec, &mut rng)?;
    randomize_all(&mut store, &mut rng)?;
    let x = random_features(&mut rng, 7, 2);
    let names = store.names();
    let f: LossFn = Box::new(move |s: &ParameterStore| {
        let mut tape = Tape::new();
        let z = mpnn_forward(&mut tape, s, "m", &spec, &g, &x)?;
        let loss = tape.sum_elems(z);
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).item()?, grads))
    });
    Ok(BlockInstance { store, names, f })
}

fn mlp_instance(seed: u64) -> Result<BlockInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = MlpSpec::new(4, vec![6, 5], 3)?;
    let mut store = ParameterStore::new();
    init_mlp(&mut store, "f", &spec, &mut rng)?;
    randomize_all(&mut store, &mut rng)?;
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let names = store.names();
    let f: LossFn = Box::new(move |s: &ParameterStore| {
        let mut tape = Tape::new();
        let xin = tape.constant(Tensor::vector(x.clone()));
        let out = mlp_forward(&mut tape, s, "f", &spec, xin)?;
        let loss = tape.sum_elems(out);
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).item()?, grads))
    });
    Ok(BlockInstance { store, names, f })
}

fn softmax_ce_instance(seed: u64) -> Result<BlockInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = MlpSpec::new(3, vec![5], 4)?;
    let mut store = ParameterStore::new();
    init_mlp(&mut store, "c", &spec, &mut rng)?;
    randomize_all(&mut store, &mut rng)?;
    let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let label = (seed % 4) as usize;
    let names = store.names();
    let f: LossFn = Box::new(move |s: &ParameterStore| {
        let mut tape = Tape::new();
        let xin = tape.constant(Tensor::vector(x.clone()));
        let logits = mlp_forward(&mut tape, s, "c", &spec, xin)?;
        let loss = tape.softmax_cross_entropy(logits, label)?;
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).item()?, grads))
    });
    Ok(BlockInstance { store, names, f })
}

struct CoverageLoss;

impl RewardEvaluator for CoverageLoss {
    fn loss(&self, state: &EnvState) -> Result<f64> {
        Ok(1.0 / (1.0 + state.covered_nodes().len() as f64))
    }
}

fn trajectory_setup(
    seed: u64,
) -> Result<(Graph, NodeFeatureMatrix, AgentPair, MpnnSpec, ParameterStore, Vec<Trajectory>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, 5);
    let spec = MpnnSpec::new(2, 2, 4, 3)?;
    let agent = AgentPair::new(MdpKind::WalkExploration, 3, 4, vec![6])?;
    let mut store = ParameterStore::new();
    init_mpnn(&mut store, "theta", &spec, &mut rng)?;
    agent.init(&mut store, &mut rng)?;
    randomize_all(&mut store, &mut rng)?;
    let x = random_features(&mut rng, 5, 2);
    let cfg = EnvConfig::new(MdpKind::WalkExploration, 4)?;
    let z = crate::nn::blocks::mpnn_forward_plain(&store, "theta", &spec, &g, &x)?;
    let trajectories = rollout(
        &g,
        0,
        &store,
        &agent,
        &z,
        &cfg,
        RolloutMode::Train { epsilon: 0.5 },
        2,
        Some(&CoverageLoss),
        &mut rng,
    )?;
    Ok((g, x, agent, spec, store, trajectories))
}

fn trajectory_instance(seed: u64, gamma: f64, phi_only: bool) -> Result<BlockInstance> {
    let (g, x, agent, spec, store, trajectories) = trajectory_setup(seed)?;
    let names = if phi_only {
        store.names_with_prefix(&format!("{POLICY_PREFIX}."))
    } else {
        let mut n = store.names_with_prefix("theta.");
        n.extend(store.names_with_prefix(&format!("{POLICY_PREFIX}.")));
        n
    };
    let f: LossFn = Box::new(move |s: &ParameterStore| {
        let mut tape = Tape::new();
        let z = mpnn_forward(&mut tape, s, "theta", &spec, &g, &x)?;
        let batch: Vec<(&Graph, &Trajectory, crate::nn::tape::ValueId)> =
            trajectories.iter().map(|t| (&g, t, z)).collect();
        let loss = trajectory_loss(&mut tape, s, &agent, &batch, gamma, 4)?;
        let grads = tape.backward(loss)?;
        Ok((tape.value(loss).item()?, grads))
    });
    Ok(BlockInstance { store, names, f })
}

fn run_block(
    block: &'static str,
    num_seeds: u64,
    corrupt: bool,
    make: impl Fn(u64) -> Result<BlockInstance>,
) -> Result<BlockReport> {
    let mut worst: f64 = 0.0;
    for seed in 0..num_seeds {
        let inst = make(seed)?;
        let f = &inst.f;
        let wrapped = |s: &ParameterStore| {
            let (loss, mut grads) = f(s)?;
            if corrupt {
                if let Some(t) = grads.values_mut().next() {
                    t.data_mut()[0] += 0.5;
                }
            }
            Ok((loss, grads))
        };
        let err = finite_difference_check(&inst.store, &inst.names, FD_STEP, wrapped)?;
        worst = worst.max(err);
    }
    Ok(BlockReport {
        block,
        max_rel_err: worst,
    })
}

/// Checks every block over `num_seeds` random instances each; a block
/// passes when its worst relative error stays under
/// [`REL_ERR_THRESHOLD`].
pub fn gradient_check_suite(num_seeds: u64) -> Result<Vec<BlockReport>> {
    gradient_check_suite_with(num_seeds, None)
}

/// Same, with an optional block whose computed gradients are deliberately
/// corrupted before comparison. Exercises the failure path end to end.
pub fn gradient_check_suite_with(
    num_seeds: u64,
    corrupt_block: Option<&str>,
) -> Result<Vec<BlockReport>> {
    let c = |name: &str| corrupt_block == Some(name);
    Ok(vec![
        run_block("gin_layer", num_seeds, c("gin_layer"), gin_layer_instance)?,
        run_block("mpnn_forward", num_seeds, c("mpnn_forward"), mpnn_instance)?,
        run_block("mlp_forward", num_seeds, c("mlp_forward"), mlp_instance)?,
        run_block(
            "softmax_cross_entropy",
            num_seeds,
            c("softmax_cross_entropy"),
            softmax_ce_instance,
        )?,
        run_block("trajectory_loss", num_seeds, c("trajectory_loss"), |s| {
            trajectory_instance(s, 0.0, false)
        })?,
        run_block(
            "trajectory_loss_discounted",
            num_seeds,
            c("trajectory_loss_discounted"),
            |s| trajectory_instance(s, 0.9, true),
        )?,
    ])
}
