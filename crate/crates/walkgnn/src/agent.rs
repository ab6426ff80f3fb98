//! The Q-learning substructure generator: policy and target value networks
//! scoring (state encoding, candidate embedding) pairs, ε-greedy trajectory
//! sampling with top-K seeded starts, Bellman targets against the target
//! net, the trajectory L1 loss, and the soft target update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{
    apply_action, encode_state, encode_state_taped, encoding_dim, feasible_actions, initial_state,
    is_terminal, EnvConfig, EnvState, MdpKind, RewardEvaluator,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::blocks::{init_mlp, mlp_forward, MlpSpec};
use crate::nn::kernels;
use crate::nn::params::ParameterStore;
use crate::nn::tape::{Tape, ValueId};
use crate::nn::tensor::Tensor;

pub const POLICY_PREFIX: &str = "phi";
pub const TARGET_PREFIX: &str = "phi_target";

/// Policy/target value-network pair. Both nets share one architecture and
/// live in the parameter store under [`POLICY_PREFIX`] and
/// [`TARGET_PREFIX`]; the target is written only by [`soft_update`].
#[derive(Debug, Clone)]
pub struct AgentPair {
    pub q_spec: MlpSpec,
    pub enc_dim: usize,
    pub k: usize,
}

impl AgentPair {
    /// Architecture for a process kind: input is the state encoding plus
    /// one candidate embedding row.
    pub fn new(kind: MdpKind, k: usize, l: usize, q_hidden: Vec<usize>) -> Result<Self> {
        let enc_dim = encoding_dim(kind, k, l);
        Ok(AgentPair {
            q_spec: MlpSpec::new(enc_dim + k, q_hidden, 1)?,
            enc_dim,
            k,
        })
    }

    /// Registers policy parameters and an identical target copy.
    pub fn init(&self, store: &mut ParameterStore, rng: &mut impl Rng) -> Result<()> {
        init_mlp(store, POLICY_PREFIX, &self.q_spec, rng)?;
        store.copy_prefix(POLICY_PREFIX, TARGET_PREFIX)
    }
}

/// Exploration schedule: linear from `start` at epoch 0 to `end` at the
/// final epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub epochs: usize,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, epochs: usize) -> Result<Self> {
        for e in [start, end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::input(format!("exploration rate {e} outside [0, 1]")));
            }
        }
        if epochs == 0 {
            return Err(Error::input("schedule needs at least one epoch".to_string()));
        }
        Ok(EpsilonSchedule { start, end, epochs })
    }

    pub fn at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        let eps = self.start + (self.end - self.start) * t;
        eps.clamp(self.start.min(self.end), self.start.max(self.end))
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub next_state: EnvState,
    pub terminal: bool,
}

/// One generation episode on one graph. Consecutive states are linked by
/// the transition function; the last transition carries the terminal flag.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub graph_index: usize,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn final_state(&self) -> &EnvState {
        &self
            .transitions
            .last()
            .expect("trajectories hold at least the seeding transition")
            .next_state
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Scores many candidate actions against one fixed state encoding.
///
/// The first linear layer is evaluated as the state-column part once plus
/// the action-column part per candidate; the additions run in the same
/// order as a fused pass over the concatenated input, so scores are
/// bitwise identical to [`q_value`]'s definition while skipping the
/// state-part work per candidate.
pub struct QScorer<'a> {
    store: &'a ParameterStore,
    prefix: &'a str,
    spec: &'a MlpSpec,
    first_w: &'a [f64],
    state_part: Vec<f64>,
    enc_dim: usize,
    k: usize,
}

impl<'a> QScorer<'a> {
    pub fn new(
        store: &'a ParameterStore,
        prefix: &'a str,
        agent: &'a AgentPair,
        state_enc: &[f64],
    ) -> Result<Self> {
        if state_enc.len() != agent.enc_dim {
            return Err(Error::contract(format!(
                "state encoding length {} does not match configured {}",
                state_enc.len(),
                agent.enc_dim
            )));
        }
        let spec = &agent.q_spec;
        let w1 = store.get(&format!("{prefix}.lin0.w"))?;
        let b1 = store.get(&format!("{prefix}.lin0.b"))?;
        let h1 = w1.shape()[0];
        let in_dim = w1.shape()[1];
        if in_dim != spec.in_dim {
            return Err(Error::contract(format!(
                "value net expects input {} but weights have {in_dim} columns",
                spec.in_dim
            )));
        }
        let mut state_part = vec![0.0; h1];
        for (o, slot) in state_part.iter_mut().enumerate() {
            let row = &w1.data()[o * in_dim..o * in_dim + agent.enc_dim];
            let mut acc = b1.data()[o];
            for (wi, xi) in row.iter().zip(state_enc) {
                acc += wi * xi;
            }
            *slot = acc;
        }
        Ok(QScorer {
            store,
            prefix,
            spec,
            first_w: w1.data(),
            state_part,
            enc_dim: agent.enc_dim,
            k: agent.k,
        })
    }

    /// Q-value of the candidate whose embedding row is `z_row`.
    pub fn score(&self, z_row: &[f64]) -> Result<f64> {
        if z_row.len() != self.k {
            return Err(Error::contract(format!(
                "candidate embedding width {} does not match configured {}",
                z_row.len(),
                self.k
            )));
        }
        let in_dim = self.spec.in_dim;
        let mut h: Vec<f64> = self
            .state_part
            .iter()
            .enumerate()
            .map(|(o, &base)| {
                let row = &self.first_w[o * in_dim + self.enc_dim..(o + 1) * in_dim];
                let mut acc = base;
                for (wi, zi) in row.iter().zip(z_row) {
                    acc += wi * zi;
                }
                acc
            })
            .collect();
        let dims = self.spec.dims();
        for i in 1..self.spec.layer_count() {
            h = kernels::relu(&h);
            let w = self.store.get(&format!("{}.lin{i}.w", self.prefix))?;
            let b = self.store.get(&format!("{}.lin{i}.b", self.prefix))?;
            h = kernels::linear_vec(w.data(), b.data(), &h, dims[i + 1], dims[i]);
        }
        Ok(h[0])
    }
}

fn z_row(z: &Tensor, node: usize, k: usize) -> Result<&[f64]> {
    if z.cols() != k || node >= z.rows() {
        return Err(Error::contract(format!(
            "node {node} outside {}x{} embedding matrix (need width {k})",
            z.rows(),
            z.cols()
        )));
    }
    Ok(&z.data()[node * k..(node + 1) * k])
}

/// Value of one (state, action) pair under the net at `prefix`: the MLP
/// applied to the state encoding concatenated with the candidate's
/// embedding row.
pub fn q_value(
    store: &ParameterStore,
    prefix: &str,
    agent: &AgentPair,
    state_enc: &[f64],
    action_node: usize,
    z: &Tensor,
) -> Result<f64> {
    let scorer = QScorer::new(store, prefix, agent, state_enc)?;
    scorer.score(z_row(z, action_node, agent.k)?)
}

/// Highest-Q feasible action under the policy net, with ties broken toward
/// the lowest node id. Candidates arrive sorted, so keeping the first
/// strict improvement realizes the tie-break.
fn greedy_action(
    graph: &Graph,
    state: &EnvState,
    store: &ParameterStore,
    agent: &AgentPair,
    z: &Tensor,
    l: usize,
) -> Result<usize> {
    let actions = feasible_actions(graph, state);
    if actions.is_empty() {
        return Err(Error::contract(
            "action selection on a state with no candidates".to_string(),
        ));
    }
    let enc = encode_state(state, z, l)?;
    let scorer = QScorer::new(store, POLICY_PREFIX, agent, &enc)?;
    let mut best = actions[0];
    let mut best_q = f64::NEG_INFINITY;
    for &a in &actions {
        let q = scorer.score(z_row(z, a, agent.k)?)?;
        if q > best_q {
            best_q = q;
            best = a;
        }
    }
    Ok(best)
}

/// The behavior policy: with draw `q` below `epsilon` a uniformly random
/// feasible action, otherwise the greedy one. Inference passes
/// `q = f64::INFINITY`, which always takes the greedy branch.
pub fn epsilon_greedy_action(
    graph: &Graph,
    state: &EnvState,
    q: f64,
    epsilon: f64,
    store: &ParameterStore,
    agent: &AgentPair,
    z: &Tensor,
    l: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if q < epsilon {
        let actions = feasible_actions(graph, state);
        if actions.is_empty() {
            return Err(Error::contract(
                "action selection on a state with no candidates".to_string(),
            ));
        }
        Ok(actions[rng.gen_range(0..actions.len())])
    } else {
        greedy_action(graph, state, store, agent, z, l)
    }
}

/// Bellman target `r + gamma * max target-net Q over next candidates`;
/// just `r` when the next state is terminal or has no candidates. Read
/// from the target net, never differentiated.
pub fn q_target(
    graph: &Graph,
    reward: f64,
    next_state: &EnvState,
    terminal: bool,
    gamma: f64,
    store: &ParameterStore,
    agent: &AgentPair,
    z: &Tensor,
    l: usize,
) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let actions = feasible_actions(graph, next_state);
    if actions.is_empty() {
        return Ok(reward);
    }
    let enc = encode_state(next_state, z, l)?;
    let scorer = QScorer::new(store, TARGET_PREFIX, agent, &enc)?;
    let mut best = f64::NEG_INFINITY;
    for &a in &actions {
        best = best.max(scorer.score(z_row(z, a, agent.k)?)?);
    }
    Ok(reward + gamma * best)
}

/// Sum over trajectories and transitions of
/// `|policy-net Q(E(s, Z), a) - Bellman target|`, on the tape: gradients
/// reach the policy net and, through the state/action encodings, the
/// embedding producer. Targets are computed first with the target net and
/// enter as constants.
pub fn trajectory_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    agent: &AgentPair,
    batch: &[(&Graph, &Trajectory, ValueId)],
    gamma: f64,
    l: usize,
) -> Result<ValueId> {
    if batch.is_empty() {
        return Err(Error::input("trajectory loss over an empty batch".to_string()));
    }
    let mut terms = Vec::new();
    for &(graph, trajectory, z_id) in batch {
        let targets: Vec<f64> = {
            let z = tape.value(z_id).clone();
            trajectory
                .transitions
                .iter()
                .map(|t| {
                    q_target(
                        graph,
                        t.reward,
                        &t.next_state,
                        t.terminal,
                        gamma,
                        store,
                        agent,
                        &z,
                        l,
                    )
                })
                .collect::<Result<_>>()?
        };
        for (t, &target) in trajectory.transitions.iter().zip(&targets) {
            let enc = encode_state_taped(tape, &t.state, z_id, l)?;
            let a_row = tape.concat_rows_padded(z_id, &[t.action], agent.k)?;
            let q_in = tape.concat(enc, a_row);
            let q = mlp_forward(tape, store, POLICY_PREFIX, &agent.q_spec, q_in)?;
            terms.push(tape.abs_diff_const(q, target)?);
        }
    }
    tape.sum(&terms)
}

/// Blends the policy into the target: `target = beta * policy +
/// (1 - beta) * target`, elementwise. The policy is untouched.
pub fn soft_update(store: &mut ParameterStore, beta: f64) -> Result<()> {
    store.blend_prefix(POLICY_PREFIX, TARGET_PREFIX, beta)
}

/// The `k_samples` initial actions with the highest policy-net Q at the
/// empty state (all nodes are candidates there), best first, ties toward
/// the lower node id. Graphs smaller than `k_samples` yield all nodes.
pub fn top_k_initial_actions(
    graph: &Graph,
    store: &ParameterStore,
    agent: &AgentPair,
    z: &Tensor,
    cfg: &EnvConfig,
    k_samples: usize,
) -> Result<Vec<usize>> {
    if k_samples == 0 {
        return Err(Error::input("sample count must be at least 1".to_string()));
    }
    let init = initial_state(graph, 0, cfg)?;
    let enc = encode_state(&init, z, cfg.max_steps)?;
    let scorer = QScorer::new(store, POLICY_PREFIX, agent, &enc)?;
    let mut scored: Vec<(usize, f64)> = (0..graph.node_count())
        .map(|v| Ok((v, scorer.score(z_row(z, v, agent.k)?)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k_samples);
    Ok(scored.into_iter().map(|(v, _)| v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RolloutMode {
    /// Draws `q ~ U(0,1)` per step and explores below `epsilon`; computes
    /// rewards with the evaluator.
    Train { epsilon: f64 },
    /// Always greedy (`q = +inf`), no rewards.
    Greedy,
}

/// Runs one episode per top-K initial action: seed with the initial
/// action, then follow the behavior policy until termination. Train mode
/// scores every transition with the frozen evaluator; greedy mode leaves
/// rewards at zero.
pub fn rollout(
    graph: &Graph,
    graph_index: usize,
    store: &ParameterStore,
    agent: &AgentPair,
    z: &Tensor,
    cfg: &EnvConfig,
    mode: RolloutMode,
    k_samples: usize,
    evaluator: Option<&dyn RewardEvaluator>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Trajectory>> {
    if let (RolloutMode::Train { .. }, None) = (mode, evaluator) {
        return Err(Error::contract(
            "training rollouts need a reward evaluator".to_string(),
        ));
    }
    let seeds = top_k_initial_actions(graph, store, agent, z, cfg, k_samples)?;
    let mut out = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let mut state = initial_state(graph, graph_index, cfg)?;
        let mut prev_loss = match (mode, evaluator) {
            (RolloutMode::Train { .. }, Some(ev)) => ev.loss(&state)?,
            _ => 0.0,
        };
        let mut transitions = Vec::new();
        let mut next_action = Some(seed);
        while let Some(action) = next_action {
            let next_state = apply_action(graph, &state, action)?;
            let terminal = is_terminal(graph, &next_state, cfg);
            let reward = match (mode, evaluator) {
                (RolloutMode::Train { .. }, Some(ev)) => {
                    let cur = ev.loss(&next_state)?;
                    let r = prev_loss - cur;
                    prev_loss = cur;
                    r
                }
                _ => 0.0,
            };
            transitions.push(Transition {
                state: state.clone(),
                action,
                reward,
                next_state: next_state.clone(),
                terminal,
            });
            state = next_state;
            next_action = if terminal {
                None
            } else {
                let q = match mode {
                    RolloutMode::Train { .. } => rng.gen::<f64>(),
                    RolloutMode::Greedy => f64::INFINITY,
                };
                let eps = match mode {
                    RolloutMode::Train { epsilon } => epsilon,
                    RolloutMode::Greedy => 0.0,
                };
                Some(epsilon_greedy_action(
                    graph, &state, q, eps, store, agent, z, cfg.max_steps, rng,
                )?)
            };
        }
        out.push(Trajectory {
            graph_index,
            transitions,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::blocks::mlp_forward_plain;
    use rand::SeedableRng;

    fn cycle5() -> Graph {
        Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap()
    }

    fn walk_cfg(l: usize) -> EnvConfig {
        EnvConfig::new(MdpKind::WalkExploration, l).unwrap()
    }

    fn random_setup(seed: u64, l: usize) -> (AgentPair, ParameterStore, Tensor) {
        let agent = AgentPair::new(MdpKind::WalkExploration, 3, l, vec![8, 8]).unwrap();
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        agent.init(&mut store, &mut rng).unwrap();
        let z_data: Vec<f64> = (0..15).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let z = Tensor::matrix(5, 3, z_data).unwrap();
        (agent, store, z)
    }

    /// Net with all-zero final layer: every Q-value is exactly 0.
    fn zero_q_setup(l: usize) -> (AgentPair, ParameterStore, Tensor) {
        let (agent, mut store, z) = random_setup(5, l);
        let last = agent.q_spec.layer_count() - 1;
        let w_name = format!("{POLICY_PREFIX}.lin{last}.w");
        let shape = store.get(&w_name).unwrap().shape().to_vec();
        store.set_value(&w_name, Tensor::zeros(shape)).unwrap();
        store.blend_prefix(POLICY_PREFIX, TARGET_PREFIX, 1.0).unwrap();
        (agent, store, z)
    }

    #[test]
    fn scorer_matches_fused_forward_bitwise() {
        let (agent, store, z) = random_setup(1, 4);
        let enc: Vec<f64> = (0..agent.enc_dim).map(|i| (i as f64) * 0.01 - 0.05).collect();
        let scorer = QScorer::new(&store, POLICY_PREFIX, &agent, &enc).unwrap();
        for v in 0..5 {
            let split = scorer.score(z_row(&z, v, 3).unwrap()).unwrap();
            let mut fused_in = enc.clone();
            fused_in.extend_from_slice(z_row(&z, v, 3).unwrap());
            let fused = mlp_forward_plain(&store, POLICY_PREFIX, &agent.q_spec, &fused_in).unwrap();
            assert_eq!(split.to_bits(), fused[0].to_bits());
        }
    }

    #[test]
    fn zero_final_layer_scores_zero_everywhere() {
        let (agent, store, z) = zero_q_setup(4);
        let enc = vec![0.3; agent.enc_dim];
        for v in 0..5 {
            assert_eq!(q_value(&store, POLICY_PREFIX, &agent, &enc, v, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn q_value_is_deterministic_scalar() {
        let (agent, store, z) = random_setup(2, 4);
        let enc = vec![0.1; agent.enc_dim];
        let a = q_value(&store, POLICY_PREFIX, &agent, &enc, 2, &z).unwrap();
        let b = q_value(&store, POLICY_PREFIX, &agent, &enc, 2, &z).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn greedy_branch_equals_bruteforce_argmax() {
        let g = cycle5();
        let (agent, store, z) = random_setup(3, 4);
        let cfg = walk_cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = initial_state(&g, 0, &cfg).unwrap();
        for _ in 0..3 {
            let chosen = epsilon_greedy_action(
                &g, &state, f64::INFINITY, 0.4, &store, &agent, &z, 4, &mut rng,
            )
            .unwrap();
            let enc = encode_state(&state, &z, 4).unwrap();
            let brute = feasible_actions(&g, &state)
                .into_iter()
                .map(|a| (a, q_value(&store, POLICY_PREFIX, &agent, &enc, a, &z).unwrap()))
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (a, q)| {
                    if q > acc.1 {
                        (a, q)
                    } else {
                        acc
                    }
                })
                .0;
            assert_eq!(chosen, brute);
            state = apply_action(&g, &state, chosen).unwrap();
        }
    }

    #[test]
    fn equal_q_ties_break_to_lowest_node_id() {
        let g = cycle5();
        let (agent, store, z) = zero_q_setup(4);
        let cfg = walk_cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = initial_state(&g, 0, &cfg).unwrap();
        let a = epsilon_greedy_action(
            &g, &state, f64::INFINITY, 1.0, &store, &agent, &z, 4, &mut rng,
        )
        .unwrap();
        assert_eq!(a, 0);
    }

    #[test]
    fn epsilon_one_reaches_every_feasible_action() {
        let g = cycle5();
        let (agent, store, z) = random_setup(4, 4);
        let cfg = walk_cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = initial_state(&g, 0, &cfg).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let a =
                epsilon_greedy_action(&g, &state, rng.gen(), 1.0, &store, &agent, &z, 4, &mut rng)
                    .unwrap();
            seen.insert(a);
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn bellman_target_with_zero_gamma_is_reward() {
        let g = cycle5();
        let (agent, store, z) = random_setup(6, 4);
        let cfg = walk_cfg(4);
        let s = initial_state(&g, 0, &cfg).unwrap();
        let s1 = apply_action(&g, &s, 2).unwrap();
        let t = q_target(&g, 0.7, &s1, false, 0.0, &store, &agent, &z, 4).unwrap();
        assert_eq!(t, 0.7);
    }

    #[test]
    fn bellman_target_arithmetic_with_constant_net() {
        // Target net outputs exactly 1.0 everywhere: zero weights, bias 1.
        let g = cycle5();
        let (agent, mut store, z) = zero_q_setup(4);
        let last = agent.q_spec.layer_count() - 1;
        store
            .set_value(&format!("{TARGET_PREFIX}.lin{last}.b"), Tensor::vector(vec![1.0]))
            .unwrap();
        let cfg = walk_cfg(4);
        let s = initial_state(&g, 0, &cfg).unwrap();
        let s1 = apply_action(&g, &s, 2).unwrap();
        let t = q_target(&g, 0.5, &s1, false, 0.9, &store, &agent, &z, 4).unwrap();
        assert_eq!(t, 0.5 + 0.9 * 1.0);
    }

    #[test]
    fn terminal_target_is_reward_only() {
        let g = cycle5();
        let (agent, store, z) = random_setup(8, 4);
        let cfg = walk_cfg(4);
        let s = initial_state(&g, 0, &cfg).unwrap();
        let s1 = apply_action(&g, &s, 0).unwrap();
        let t = q_target(&g, 0.3, &s1, true, 0.9, &store, &agent, &z, 4).unwrap();
        assert_eq!(t, 0.3);
    }

    #[test]
    fn soft_update_examples() {
        let mut store = ParameterStore::new();
        store.insert("phi.lin0.w", Tensor::scalar(1.0)).unwrap();
        store.insert("phi_target.lin0.w", Tensor::scalar(0.0)).unwrap();
        soft_update(&mut store, 0.1).unwrap();
        assert_eq!(store.get("phi_target.lin0.w").unwrap().data()[0], 0.1);
        soft_update(&mut store, 1.0).unwrap();
        assert_eq!(store.get("phi_target.lin0.w").unwrap().data()[0], 1.0);
        store.set_value("phi_target.lin0.w", Tensor::scalar(0.25)).unwrap();
        soft_update(&mut store, 0.0).unwrap();
        assert_eq!(store.get("phi_target.lin0.w").unwrap().data()[0], 0.25);
        assert_eq!(store.get("phi.lin0.w").unwrap().data()[0], 1.0);
    }

    #[test]
    fn top_k_orders_by_score_then_id() {
        // Single-layer net reading the first embedding coordinate.
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let agent = AgentPair::new(MdpKind::WalkExploration, 2, 2, vec![]).unwrap();
        let mut store = ParameterStore::new();
        let mut w = vec![0.0; agent.q_spec.in_dim];
        w[agent.enc_dim] = 1.0;
        store.insert("phi.lin0.w", Tensor::matrix(1, agent.q_spec.in_dim, w).unwrap()).unwrap();
        store.insert("phi.lin0.b", Tensor::vector(vec![0.0])).unwrap();
        store.copy_prefix(POLICY_PREFIX, TARGET_PREFIX).unwrap();
        let z = Tensor::matrix(3, 2, vec![0.9, 0.0, 0.5, 0.0, 0.7, 0.0]).unwrap();
        let cfg = walk_cfg(2);
        assert_eq!(
            top_k_initial_actions(&g, &store, &agent, &z, &cfg, 2).unwrap(),
            vec![0, 2]
        );
        assert_eq!(
            top_k_initial_actions(&g, &store, &agent, &z, &cfg, 10).unwrap(),
            vec![0, 2, 1]
        );
        // K = 1 agrees with the greedy action at the initial state.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = initial_state(&g, 0, &cfg).unwrap();
        let greedy = epsilon_greedy_action(
            &g, &init, f64::INFINITY, 1.0, &store, &agent, &z, 2, &mut rng,
        )
        .unwrap();
        assert_eq!(
            top_k_initial_actions(&g, &store, &agent, &z, &cfg, 1).unwrap(),
            vec![greedy]
        );
    }

    struct CoverageLoss;

    impl RewardEvaluator for CoverageLoss {
        fn loss(&self, state: &EnvState) -> Result<f64> {
            Ok(1.0 / (1.0 + state.covered_nodes().len() as f64))
        }
    }

    #[test]
    fn greedy_rollouts_are_deterministic_and_terminal() {
        let g = cycle5();
        let (agent, store, z) = random_setup(9, 4);
        let cfg = walk_cfg(4);
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(2);
        let a = rollout(&g, 0, &store, &agent, &z, &cfg, RolloutMode::Greedy, 3, None, &mut rng_a)
            .unwrap();
        let b = rollout(&g, 0, &store, &agent, &z, &cfg, RolloutMode::Greedy, 3, None, &mut rng_b)
            .unwrap();
        assert_eq!(a.len(), 3);
        for (ta, tb) in a.iter().zip(&b) {
            let seq_a: Vec<usize> = ta.transitions.iter().map(|t| t.action).collect();
            let seq_b: Vec<usize> = tb.transitions.iter().map(|t| t.action).collect();
            assert_eq!(seq_a, seq_b);
            assert!(ta.len() <= 4);
            assert!(ta.transitions.last().unwrap().terminal);
        }
    }

    #[test]
    fn train_rollout_rewards_telescope_to_loss_drop() {
        let g = cycle5();
        let (agent, store, z) = random_setup(10, 4);
        let cfg = walk_cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
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
        )
        .unwrap();
        for t in trajectories {
            let total: f64 = t.transitions.iter().map(|tr| tr.reward).sum();
            let init = initial_state(&g, 0, &cfg).unwrap();
            let expect =
                CoverageLoss.loss(&init).unwrap() - CoverageLoss.loss(t.final_state()).unwrap();
            assert!((total - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_loss_single_transition_value() {
        // Policy net constant 1.0, target net constant 2.0, gamma 0:
        // target = r = 0.25, prediction = 1.0, loss = 0.75.
        let g = cycle5();
        let (agent, mut store, z) = zero_q_setup(4);
        let last = agent.q_spec.layer_count() - 1;
        store
            .set_value(&format!("{POLICY_PREFIX}.lin{last}.b"), Tensor::vector(vec![1.0]))
            .unwrap();
        let cfg = walk_cfg(4);
        let s = initial_state(&g, 0, &cfg).unwrap();
        let s1 = apply_action(&g, &s, 2).unwrap();
        let trajectory = Trajectory {
            graph_index: 0,
            transitions: vec![Transition {
                state: s,
                action: 2,
                reward: 0.25,
                next_state: s1,
                terminal: false,
            }],
        };
        let mut tape = Tape::new();
        let z_id = tape.constant(z);
        let loss =
            trajectory_loss(&mut tape, &store, &agent, &[(&g, &trajectory, z_id)], 0.0, 4)
                .unwrap();
        assert_eq!(tape.value(loss).item().unwrap(), 0.75);
    }

    #[test]
    fn trajectory_loss_gradient_reaches_policy_net() {
        let g = cycle5();
        let (agent, store, z) = random_setup(11, 4);
        let cfg = walk_cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trajectories = rollout(
            &g,
            0,
            &store,
            &agent,
            &z,
            &cfg,
            RolloutMode::Train { epsilon: 0.3 },
            2,
            Some(&CoverageLoss),
            &mut rng,
        )
        .unwrap();
        let mut tape = Tape::new();
        let z_id = tape.constant(z);
        let batch: Vec<(&Graph, &Trajectory, ValueId)> =
            trajectories.iter().map(|t| (&g, t, z_id)).collect();
        let loss = trajectory_loss(&mut tape, &store, &agent, &batch, 0.9, 4).unwrap();
        let grads = tape.backward(loss).unwrap();
        let policy_grad_norm: f64 = grads
            .iter()
            .filter(|(n, _)| n.starts_with(POLICY_PREFIX))
            .flat_map(|(_, t)| t.data())
            .map(|g| g.abs())
            .sum();
        assert!(policy_grad_norm > 0.0);
        assert!(grads.keys().all(|n| !n.starts_with(TARGET_PREFIX)));
    }

    #[test]
    fn epsilon_schedule_endpoints_and_clamp() {
        let s = EpsilonSchedule::new(0.1, 0.4, 4).unwrap();
        assert!((s.at(0) - 0.1).abs() < 1e-12);
        assert!((s.at(3) - 0.4).abs() < 1e-12);
        assert!((s.at(10) - 0.4).abs() < 1e-12);
        let one = EpsilonSchedule::new(0.2, 0.9, 1).unwrap();
        assert_eq!(one.at(0), 0.2);
    }
}
