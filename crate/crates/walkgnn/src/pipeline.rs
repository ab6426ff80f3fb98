//! Composition of the sampling and output models: alternating two-stage
//! training, greedy inference, and cross-validated evaluation.
//!
//! Parameter prefixes: "theta" (sampling-side embedder), "phi"/"phi_target"
//! (value nets), "theta_out" (output-side embedder), "decoder" (classifier
//! head). Each training stage updates only its own side and leaves the
//! other bit-identical; debug builds assert this every stage.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{
    rollout, soft_update, trajectory_loss, AgentPair, EpsilonSchedule, RolloutMode, Trajectory,
};
use crate::data::GraphDataset;
use crate::env::{
    encode_state, encode_state_taped, encoding_dim, EnvConfig, EnvState, MdpKind, RewardEvaluator,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatureMatrix};
use crate::nn::blocks::{
    init_mlp, init_mpnn, mlp_forward, mlp_forward_plain, mpnn_forward, mpnn_forward_plain,
    MlpSpec, MpnnSpec,
};
use crate::nn::kernels;
use crate::nn::params::ParameterStore;
use crate::nn::tape::{Tape, ValueId};
use crate::nn::tensor::Tensor;

pub const THETA_PREFIX: &str = "theta";
pub const THETA_OUT_PREFIX: &str = "theta_out";
pub const DECODER_PREFIX: &str = "decoder";

/// How the K per-graph substructure encodings are combined before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Max,
}

/// Substructure generator: embedder, value nets, process dynamics, and the
/// Q-learning hyperparameters.
#[derive(Debug, Clone)]
pub struct SamplingModel {
    pub mpnn: MpnnSpec,
    pub agent: AgentPair,
    pub env: EnvConfig,
    pub schedule: EpsilonSchedule,
    pub gamma: f64,
    pub beta: f64,
}

/// Classifier over extracted substructures: its own embedder, a decoder
/// head, and the pooling rule across the K samples.
#[derive(Debug, Clone)]
pub struct OutputModel {
    pub mpnn: MpnnSpec,
    pub decoder: MlpSpec,
    pub pooling: Pooling,
    pub num_classes: usize,
}

/// All training knobs. Defaults follow the evaluation protocol: 3-layer
/// embedders, discount 0.9, smoothing 0.1, exploration growing 0.1 to 0.4.
/// Gradient norms are capped at 5 per update; `grad_clip: 0.0` lifts the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: MdpKind,
    pub max_steps: usize,
    pub k_samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub beta: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub lr_sampling: f64,
    pub lr_output: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub mpnn_layers: usize,
    pub q_hidden: Vec<usize>,
    pub pooling: Pooling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: MdpKind::WalkExploration,
            max_steps: 16,
            k_samples: 3,
            epochs: 200,
            batch_size: 32,
            gamma: 0.9,
            beta: 0.1,
            eps_start: 0.1,
            eps_end: 0.4,
            lr_sampling: 1e-3,
            lr_output: 1e-3,
            grad_clip: 5.0,
            seed: 0,
            embed_dim: 32,
            hidden_dim: 32,
            mpnn_layers: 3,
            q_hidden: vec![64, 64],
            pooling: Pooling::Mean,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || self.k_samples == 0 || self.batch_size == 0 {
            return Err(Error::input(
                "step bound, sample count, and batch size must be positive".to_string(),
            ));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.mpnn_layers == 0 {
            return Err(Error::input("model dimensions must be positive".to_string()));
        }
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{name} {v} outside [0, 1]")));
            }
        }
        for (name, v) in [("lr_sampling", self.lr_sampling), ("lr_output", self.lr_output)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::input(format!("{name} {v} must be positive")));
            }
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::input(format!(
                "grad_clip {} must be zero or a positive bound",
                self.grad_clip
            )));
        }
        EpsilonSchedule::new(self.eps_start, self.eps_end, self.epochs.max(1))?;
        Ok(())
    }
}

/// One metrics line: emitted per epoch per fold as line-delimited JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub fold: usize,
    pub sampling_loss: f64,
    pub output_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub best_val_acc: f64,
    pub best_epoch: usize,
    pub records: Vec<EpochRecord>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub folds: Vec<FoldOutcome>,
    pub mean_best_val_acc: f64,
    pub std_best_val_acc: f64,
    pub wall_time_secs: f64,
}

/// Builds both model descriptions for a dataset shape. The decoder reads
/// the kind-matching state encoding and emits one logit per class.
pub fn build_models(
    cfg: &TrainConfig,
    feature_dim: usize,
    num_classes: usize,
) -> Result<(SamplingModel, OutputModel)> {
    cfg.validate()?;
    let sm = SamplingModel {
        mpnn: MpnnSpec::new(cfg.mpnn_layers, feature_dim, cfg.hidden_dim, cfg.embed_dim)?,
        agent: AgentPair::new(cfg.kind, cfg.embed_dim, cfg.max_steps, cfg.q_hidden.clone())?,
        env: EnvConfig::new(cfg.kind, cfg.max_steps)?,
        schedule: EpsilonSchedule::new(cfg.eps_start, cfg.eps_end, cfg.epochs.max(1))?,
        gamma: cfg.gamma,
        beta: cfg.beta,
    };
    let enc_dim = encoding_dim(cfg.kind, cfg.embed_dim, cfg.max_steps);
    let om = OutputModel {
        mpnn: MpnnSpec::new(cfg.mpnn_layers, feature_dim, cfg.hidden_dim, cfg.embed_dim)?,
        decoder: MlpSpec::new(enc_dim, vec![cfg.hidden_dim], num_classes)?,
        pooling: cfg.pooling,
        num_classes,
    };
    Ok((sm, om))
}

/// Registers all five parameter groups in a fixed draw order so a seed
/// pins every initial weight.
pub fn init_params(
    sm: &SamplingModel,
    om: &OutputModel,
    store: &mut ParameterStore,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    init_mpnn(store, THETA_PREFIX, &sm.mpnn, rng)?;
    sm.agent.init(store, rng)?;
    init_mpnn(store, THETA_OUT_PREFIX, &om.mpnn, rng)?;
    init_mlp(store, DECODER_PREFIX, &om.decoder, rng)
}

fn pool_plain(pooling: Pooling, encs: &[Vec<f64>]) -> Vec<f64> {
    // Mirrors the taped pooling ops element for element so plain and taped
    // logits agree bitwise.
    match pooling {
        Pooling::Mean => {
            let mut out = vec![0.0; encs[0].len()];
            for e in encs {
                for (slot, x) in out.iter_mut().zip(e) {
                    *slot += x;
                }
            }
            let inv = 1.0 / encs.len() as f64;
            for slot in &mut out {
                *slot *= inv;
            }
            out
        }
        Pooling::Max => {
            let mut out = encs[0].clone();
            for e in &encs[1..] {
                for (slot, &x) in out.iter_mut().zip(e) {
                    if x > *slot {
                        *slot = x;
                    }
                }
            }
            out
        }
    }
}

fn argmax_tie_low(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > best_v {
            best_v = x;
            best = i;
        }
    }
    best
}

/// Class logits for K extracted substructures of one graph, on the tape:
/// output-side embeddings, per-state encoding, pooling, decoder.
/// Differentiable in the output-side parameters only; the states are fixed
/// inputs.
pub fn output_forward(
    tape: &mut Tape,
    store: &ParameterStore,
    om: &OutputModel,
    graph: &Graph,
    x: &NodeFeatureMatrix,
    final_states: &[EnvState],
    l: usize,
) -> Result<ValueId> {
    if final_states.is_empty() {
        return Err(Error::contract("no final states to decode".to_string()));
    }
    let z_out = mpnn_forward(tape, store, THETA_OUT_PREFIX, &om.mpnn, graph, x)?;
    let encs: Vec<ValueId> = final_states
        .iter()
        .map(|s| encode_state_taped(tape, s, z_out, l))
        .collect::<Result<_>>()?;
    let pooled = match om.pooling {
        Pooling::Mean => tape.mean_vecs(&encs)?,
        Pooling::Max => tape.max_vecs(&encs)?,
    };
    mlp_forward(tape, store, DECODER_PREFIX, &om.decoder, pooled)
}

/// Gradient-free twin of [`output_forward`] that reuses precomputed
/// output-side embeddings.
fn output_logits_from_z(
    store: &ParameterStore,
    om: &OutputModel,
    z_out: &Tensor,
    final_states: &[EnvState],
    l: usize,
) -> Result<Vec<f64>> {
    let encs: Vec<Vec<f64>> = final_states
        .iter()
        .map(|s| encode_state(s, z_out, l))
        .collect::<Result<_>>()?;
    let pooled = pool_plain(om.pooling, &encs);
    mlp_forward_plain(store, DECODER_PREFIX, &om.decoder, &pooled)
}

/// Downstream classification loss of a single state under the frozen
/// output model. Output-side embeddings are computed once at construction,
/// so a reward query costs one encoding plus one decoder pass.
pub struct OutputLossEvaluator<'a> {
    store: &'a ParameterStore,
    om: &'a OutputModel,
    z_out: Tensor,
    label: usize,
    l: usize,
}

impl RewardEvaluator for OutputLossEvaluator<'_> {
    fn loss(&self, state: &EnvState) -> Result<f64> {
        let logits = output_logits_from_z(self.store, self.om, &self.z_out, std::slice::from_ref(state), self.l)?;
        Ok(kernels::softmax_ce(&logits, self.label))
    }
}

pub fn make_reward_evaluator<'a>(
    store: &'a ParameterStore,
    om: &'a OutputModel,
    graph: &Graph,
    x: &NodeFeatureMatrix,
    label: usize,
    l: usize,
) -> Result<OutputLossEvaluator<'a>> {
    if label >= om.num_classes {
        return Err(Error::input(format!(
            "label {label} outside {} classes",
            om.num_classes
        )));
    }
    let z_out = mpnn_forward_plain(store, THETA_OUT_PREFIX, &om.mpnn, graph, x)?;
    Ok(OutputLossEvaluator {
        store,
        om,
        z_out,
        label,
        l,
    })
}

/// Folds independent knob values into one RNG seed (splitmix64 steps).
/// Rollout seeds derive from (run seed, fold, epoch, stage, graph), so
/// parallel execution order cannot change any draw.
fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

const STAGE_SAMPLING: u64 = 1;
const STAGE_OUTPUT: u64 = 2;
const STAGE_INIT: u64 = 3;
const STAGE_SHUFFLE: u64 = 4;

fn dotted(prefixes: &[&str], store: &ParameterStore) -> Vec<String> {
    let mut names = Vec::new();
    for p in prefixes {
        names.extend(store.names_with_prefix(&format!("{p}.")));
    }
    names
}

struct RolloutBundle {
    graph_index: usize,
    trajectories: Vec<Trajectory>,
}

/// One gradient step of the generator side on a batch: embed, roll out
/// with the behavior policy against the frozen output model, minimize the
/// trajectory L1 loss over (embedder, policy net), then soften the target
/// net toward the policy. Returns the summed batch loss.
pub fn train_sampling_epoch(
    store: &mut ParameterStore,
    sm: &SamplingModel,
    om: &OutputModel,
    dataset: &GraphDataset,
    batch: &[usize],
    epsilon: f64,
    k_samples: usize,
    lr: f64,
    grad_clip: f64,
    seed_base: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::input("sampling stage over an empty batch".to_string()));
    }
    let frozen: &ParameterStore = store;
    let bundles: Vec<RolloutBundle> = batch
        .par_iter()
        .map(|&gi| {
            let graph = &dataset.graphs[gi];
            let x = &dataset.features[gi];
            let z = mpnn_forward_plain(frozen, THETA_PREFIX, &sm.mpnn, graph, x)?;
            let evaluator =
                make_reward_evaluator(frozen, om, graph, x, dataset.labels[gi], sm.env.max_steps)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed_base, gi as u64]));
            let trajectories = rollout(
                graph,
                gi,
                frozen,
                &sm.agent,
                &z,
                &sm.env,
                RolloutMode::Train { epsilon },
                k_samples,
                Some(&evaluator),
                &mut rng,
            )?;
            Ok(RolloutBundle {
                graph_index: gi,
                trajectories,
            })
        })
        .collect::<Result<_>>()?;

    let mut tape = Tape::new();
    let mut z_ids = Vec::with_capacity(bundles.len());
    for b in &bundles {
        let gi = b.graph_index;
        z_ids.push(mpnn_forward(
            &mut tape,
            store,
            THETA_PREFIX,
            &sm.mpnn,
            &dataset.graphs[gi],
            &dataset.features[gi],
        )?);
    }
    let mut entries: Vec<(&Graph, &Trajectory, ValueId)> = Vec::new();
    for (b, &z_id) in bundles.iter().zip(&z_ids) {
        for t in &b.trajectories {
            entries.push((&dataset.graphs[b.graph_index], t, z_id));
        }
    }
    let loss_id = trajectory_loss(&mut tape, store, &sm.agent, &entries, sm.gamma, sm.env.max_steps)?;
    let loss = tape.value(loss_id).item()?;
    let mut grads = tape.backward(loss_id)?;
    let subset = dotted(&[THETA_PREFIX, crate::agent::POLICY_PREFIX], store);
    clip_gradients(&mut grads, &subset, grad_clip);
    store.adam_step(&grads, &subset, lr)?;
    soft_update(store, sm.beta)?;
    Ok(loss)
}

pub struct StageOutcome {
    pub loss: f64,
    pub correct: usize,
    pub total: usize,
}

/// Rescales the subset's gradients so their joint L2 norm is at most
/// `max_norm`; zero disables the cap. One violent batch (a value-error
/// spike right after the policy shifts) can otherwise knock the relu
/// stacks into a permanently dead, constant-output regime.
fn clip_gradients(
    grads: &mut std::collections::BTreeMap<String, Tensor>,
    subset: &[String],
    max_norm: f64,
) {
    if max_norm <= 0.0 {
        return;
    }
    let mut sq = 0.0;
    for name in subset {
        if let Some(g) = grads.get(name) {
            sq += g.data().iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for name in subset {
            if let Some(g) = grads.get_mut(name) {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// One gradient step of the classifier side on a batch: greedy rollouts
/// under the frozen generator, cross-entropy of the pooled decodings, one
/// step on (output embedder, decoder). Returns the mean batch loss and the
/// pre-update hit count for train-accuracy reporting.
pub fn train_output_epoch(
    store: &mut ParameterStore,
    sm: &SamplingModel,
    om: &OutputModel,
    dataset: &GraphDataset,
    batch: &[usize],
    k_samples: usize,
    lr: f64,
    grad_clip: f64,
    seed_base: u64,
) -> Result<StageOutcome> {
    if batch.is_empty() {
        return Err(Error::input("output stage over an empty batch".to_string()));
    }
    let frozen: &ParameterStore = store;
    let bundles: Vec<RolloutBundle> = batch
        .par_iter()
        .map(|&gi| {
            let graph = &dataset.graphs[gi];
            let x = &dataset.features[gi];
            let z = mpnn_forward_plain(frozen, THETA_PREFIX, &sm.mpnn, graph, x)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed_base, gi as u64]));
            let trajectories = rollout(
                graph,
                gi,
                frozen,
                &sm.agent,
                &z,
                &sm.env,
                RolloutMode::Greedy,
                k_samples,
                None,
                &mut rng,
            )?;
            Ok(RolloutBundle {
                graph_index: gi,
                trajectories,
            })
        })
        .collect::<Result<_>>()?;

    let mut tape = Tape::new();
    let mut ces = Vec::with_capacity(bundles.len());
    let mut correct = 0;
    for b in &bundles {
        let gi = b.graph_index;
        let finals: Vec<EnvState> = b.trajectories.iter().map(|t| t.final_state().clone()).collect();
        let logits_id = output_forward(
            &mut tape,
            store,
            om,
            &dataset.graphs[gi],
            &dataset.features[gi],
            &finals,
            sm.env.max_steps,
        )?;
        let label = dataset.labels[gi];
        if argmax_tie_low(tape.value(logits_id).data()) == label {
            correct += 1;
        }
        ces.push(tape.softmax_cross_entropy(logits_id, label)?);
    }
    let total_id = tape.sum(&ces)?;
    let loss_id = tape.scale(total_id, 1.0 / ces.len() as f64);
    let loss = tape.value(loss_id).item()?;
    let mut grads = tape.backward(loss_id)?;
    let subset = dotted(&[THETA_OUT_PREFIX, DECODER_PREFIX], store);
    clip_gradients(&mut grads, &subset, grad_clip);
    store.adam_step(&grads, &subset, lr)?;
    Ok(StageOutcome {
        loss,
        correct,
        total: bundles.len(),
    })
}

/// Greedy prediction for one graph: top-K seeded greedy rollouts, decode
/// the pooled substructure encodings, argmax with class ties broken toward
/// the lower id.
#[derive(Debug, Clone)]
pub struct Inference {
    pub predicted: usize,
    pub logits: Vec<f64>,
    pub final_states: Vec<EnvState>,
}

pub fn infer(
    store: &ParameterStore,
    sm: &SamplingModel,
    om: &OutputModel,
    graph: &Graph,
    x: &NodeFeatureMatrix,
    graph_index: usize,
    k_samples: usize,
) -> Result<Inference> {
    let z = mpnn_forward_plain(store, THETA_PREFIX, &sm.mpnn, graph, x)?;
    // Greedy mode never draws from the RNG; the seed is irrelevant.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trajectories = rollout(
        graph,
        graph_index,
        store,
        &sm.agent,
        &z,
        &sm.env,
        RolloutMode::Greedy,
        k_samples,
        None,
        &mut rng,
    )?;
    let finals: Vec<EnvState> = trajectories.iter().map(|t| t.final_state().clone()).collect();
    let z_out = mpnn_forward_plain(store, THETA_OUT_PREFIX, &om.mpnn, graph, x)?;
    let logits = output_logits_from_z(store, om, &z_out, &finals, sm.env.max_steps)?;
    Ok(Inference {
        predicted: argmax_tie_low(&logits),
        logits,
        final_states: finals,
    })
}

fn accuracy(
    store: &ParameterStore,
    sm: &SamplingModel,
    om: &OutputModel,
    dataset: &GraphDataset,
    indices: &[usize],
    k_samples: usize,
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let hits: usize = indices
        .par_iter()
        .map(|&gi| {
            let inf = infer(
                store,
                sm,
                om,
                &dataset.graphs[gi],
                &dataset.features[gi],
                gi,
                k_samples,
            )?;
            Ok(usize::from(inf.predicted == dataset.labels[gi]))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(hits as f64 / indices.len() as f64)
}

#[cfg(debug_assertions)]
fn fingerprints(store: &ParameterStore, prefixes: &[&str]) -> Vec<u64> {
    prefixes
        .iter()
        .map(|p| store.fingerprint_prefix(&format!("{p}.")))
        .collect()
}

/// Trains one fold from scratch. Per epoch: full pass over the shuffled
/// training split in batches, generator stage then classifier stage per
/// batch, then validation. The best-validation parameter set is kept and,
/// when `ckpt_dir` is given, written to `{ckpt_dir}/{fold}/best.ckpt`.
pub fn train_fold(
    dataset: &GraphDataset,
    fold: usize,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    ckpt_dir: Option<&Path>,
) -> Result<(FoldOutcome, ParameterStore)> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::input(format!("fold {fold} has no training graphs")));
    }
    let started = Instant::now();
    let (sm, om) = build_models(cfg, dataset.feature_dim, dataset.num_classes)?;
    let mut store = ParameterStore::new();
    let mut init_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, fold as u64, STAGE_INIT]));
    init_params(&sm, &om, &mut store, &mut init_rng)?;

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_store = store.clone();

    for epoch in 0..cfg.epochs {
        let epsilon = sm.schedule.at(epoch);
        let mut order = train_idx.to_vec();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            cfg.seed,
            fold as u64,
            epoch as u64,
            STAGE_SHUFFLE,
        ]));
        order.shuffle(&mut shuffle_rng);

        let mut sampling_loss_sum = 0.0;
        let mut output_loss_sum = 0.0;
        let mut train_hits = 0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            #[cfg(debug_assertions)]
            let out_before = fingerprints(&store, &[THETA_OUT_PREFIX, DECODER_PREFIX]);
            let s_seed = derive_seed(&[
                cfg.seed,
                fold as u64,
                epoch as u64,
                batch_no as u64,
                STAGE_SAMPLING,
            ]);
            sampling_loss_sum += train_sampling_epoch(
                &mut store,
                &sm,
                &om,
                dataset,
                chunk,
                epsilon,
                cfg.k_samples,
                cfg.lr_sampling,
                cfg.grad_clip,
                s_seed,
            )?;
            #[cfg(debug_assertions)]
            {
                debug_assert_eq!(
                    out_before,
                    fingerprints(&store, &[THETA_OUT_PREFIX, DECODER_PREFIX]),
                    "generator stage must not touch the classifier side"
                );
            }

            #[cfg(debug_assertions)]
            let sm_before = fingerprints(
                &store,
                &[THETA_PREFIX, crate::agent::POLICY_PREFIX, crate::agent::TARGET_PREFIX],
            );
            let o_seed = derive_seed(&[
                cfg.seed,
                fold as u64,
                epoch as u64,
                batch_no as u64,
                STAGE_OUTPUT,
            ]);
            let outcome = train_output_epoch(
                &mut store,
                &sm,
                &om,
                dataset,
                chunk,
                cfg.k_samples,
                cfg.lr_output,
                cfg.grad_clip,
                o_seed,
            )?;
            #[cfg(debug_assertions)]
            {
                debug_assert_eq!(
                    sm_before,
                    fingerprints(
                        &store,
                        &[THETA_PREFIX, crate::agent::POLICY_PREFIX, crate::agent::TARGET_PREFIX],
                    ),
                    "classifier stage must not touch the generator side"
                );
            }
            output_loss_sum += outcome.loss * outcome.total as f64;
            train_hits += outcome.correct;
        }

        let n_train = order.len() as f64;
        let val_acc = accuracy(&store, &sm, &om, dataset, val_idx, cfg.k_samples)?;
        records.push(EpochRecord {
            epoch,
            fold,
            sampling_loss: sampling_loss_sum / n_train,
            output_loss: output_loss_sum / n_train,
            train_acc: train_hits as f64 / n_train,
            val_acc,
            epsilon,
        });
        if val_acc > best_val_acc {
            best_val_acc = val_acc;
            best_epoch = epoch;
            best_store = store.clone();
        }
    }

    if cfg.epochs == 0 {
        best_val_acc = accuracy(&store, &sm, &om, dataset, val_idx, cfg.k_samples)?;
    }

    if let Some(dir) = ckpt_dir {
        let fold_dir = dir.join(fold.to_string());
        std::fs::create_dir_all(&fold_dir)?;
        best_store.save(&fold_dir.join("best.ckpt"))?;
    }

    Ok((
        FoldOutcome {
            fold,
            best_val_acc,
            best_epoch,
            records,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
        best_store,
    ))
}

/// Trains every fold of a split (in parallel; each fold derives its own
/// RNG streams) and aggregates the per-fold best validation accuracies
/// into mean and population standard deviation.
pub fn train(
    dataset: &GraphDataset,
    folds: &crate::data::FoldSplit,
    cfg: &TrainConfig,
    ckpt_dir: Option<&Path>,
) -> Result<RunMetrics> {
    let started = Instant::now();
    let outcomes: Vec<FoldOutcome> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train_idx = folds.train_indices(f);
            let val_idx = folds.val_indices(f);
            train_fold(dataset, f, &train_idx, &val_idx, cfg, ckpt_dir).map(|(o, _)| o)
        })
        .collect::<Result<_>>()?;
    let bests: Vec<f64> = outcomes.iter().map(|o| o.best_val_acc).collect();
    let (mean, std) = mean_and_std(&bests);
    Ok(RunMetrics {
        folds: outcomes,
        mean_best_val_acc: mean,
        std_best_val_acc: std,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Stratified k-fold evaluation: one model per fold from scratch.
pub fn evaluate_cv(
    dataset: &GraphDataset,
    cfg: &TrainConfig,
    k: usize,
    ckpt_dir: Option<&Path>,
) -> Result<RunMetrics> {
    let folds = crate::data::stratified_k_fold(dataset, k, cfg.seed)?;
    train(dataset, &folds, cfg, ckpt_dir)
}

/// Writes metrics as line-delimited JSON, one object per epoch per fold.
pub fn write_metrics<W: Write>(mut w: W, metrics: &RunMetrics) -> Result<()> {
    for fold in &metrics.folds {
        for r in &fold.records {
            serde_json::to_writer(&mut w, r)
                .map_err(|e| Error::contract(format!("metrics serialization: {e}")))?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}

/// Summary record for a full run, as printed by the training command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub folds: usize,
    pub mean_best_val_acc: f64,
    pub std_best_val_acc: f64,
    pub per_fold_best: Vec<f64>,
    pub wall_time_secs: f64,
}

impl RunSummary {
    pub fn from_metrics(m: &RunMetrics) -> Self {
        let per_fold: Vec<f64> = m.folds.iter().map(|f| f.best_val_acc).collect();
        let (mean, std) = mean_and_std(&per_fold);
        RunSummary {
            folds: m.folds.len(),
            mean_best_val_acc: mean,
            std_best_val_acc: std,
            per_fold_best: per_fold,
            wall_time_secs: m.wall_time_secs,
        }
    }
}
