//! The two substructure-generation decision processes over a host graph:
//! subgraph growth (actions are border-neighborhood nodes, transitions add
//! the node with all its edges into the current set) and walk exploration
//! (actions are neighbors of the walk's endpoint, transitions append,
//! revisits allowed). Both share the empty initial state, where every node
//! of the graph is a candidate, and both terminate at the size bound or
//! when no candidate remains.

pub mod export;

use crate::error::{Error, Result};
use crate::graph::{Graph, SubgraphState, WalkState};
use crate::nn::tape::{Tape, ValueId};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpKind {
    SubgraphGeneration,
    WalkExploration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    pub kind: MdpKind,
    /// Maximum subgraph node count or maximum walk length.
    pub max_steps: usize,
}

impl EnvConfig {
    pub fn new(kind: MdpKind, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::input("size bound must be at least 1".to_string()));
        }
        Ok(EnvConfig { kind, max_steps })
    }
}

/// A substructure under construction inside one dataset graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub graph_index: usize,
    pub body: StateBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateBody {
    Walk(WalkState),
    Subgraph(SubgraphState),
}

impl EnvState {
    pub fn kind(&self) -> MdpKind {
        match self.body {
            StateBody::Walk(_) => MdpKind::WalkExploration,
            StateBody::Subgraph(_) => MdpKind::SubgraphGeneration,
        }
    }

    /// Walk length or subgraph node count.
    pub fn step(&self) -> usize {
        match &self.body {
            StateBody::Walk(w) => w.len(),
            StateBody::Subgraph(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.step() == 0
    }

    /// Distinct nodes covered by the substructure, sorted.
    pub fn covered_nodes(&self) -> Vec<usize> {
        match &self.body {
            StateBody::Walk(w) => w.visited().into_iter().collect(),
            StateBody::Subgraph(s) => s.nodes().to_vec(),
        }
    }
}

pub fn initial_state(graph: &Graph, graph_index: usize, config: &EnvConfig) -> Result<EnvState> {
    if graph.node_count() == 0 {
        return Err(Error::input("cannot run a generation process on an empty graph".to_string()));
    }
    let body = match config.kind {
        MdpKind::WalkExploration => StateBody::Walk(WalkState::empty()),
        MdpKind::SubgraphGeneration => StateBody::Subgraph(SubgraphState::empty()),
    };
    Ok(EnvState { graph_index, body })
}

/// Candidate actions, sorted ascending. On the empty state every node of
/// the graph is a candidate; afterwards, the walk offers the endpoint's
/// neighborhood and the subgraph offers its border neighborhood (neighbors
/// of members, minus members).
pub fn feasible_actions(graph: &Graph, state: &EnvState) -> Vec<usize> {
    match &state.body {
        StateBody::Walk(w) => match w.last() {
            None => (0..graph.node_count()).collect(),
            Some(v) => graph.adj(v).to_vec(),
        },
        StateBody::Subgraph(s) => {
            if s.is_empty() {
                return (0..graph.node_count()).collect();
            }
            let mut border = std::collections::BTreeSet::new();
            for &v in s.nodes() {
                for &u in graph.adj(v) {
                    if !s.contains(u) {
                        border.insert(u);
                    }
                }
            }
            border.into_iter().collect()
        }
    }
}

pub fn apply_action(graph: &Graph, state: &EnvState, action: usize) -> Result<EnvState> {
    if feasible_actions(graph, state).binary_search(&action).is_err() {
        return Err(Error::contract(format!(
            "action {action} is not feasible in step-{} state",
            state.step()
        )));
    }
    let body = match &state.body {
        StateBody::Walk(w) => StateBody::Walk(w.appended(action)),
        StateBody::Subgraph(s) => StateBody::Subgraph(s.extended(graph, action)),
    };
    Ok(EnvState {
        graph_index: state.graph_index,
        body,
    })
}

pub fn is_terminal(graph: &Graph, state: &EnvState, config: &EnvConfig) -> bool {
    state.step() >= config.max_steps || feasible_actions(graph, state).is_empty()
}

/// Fixed-size state encoding from node embeddings `z` (`n x k`):
/// mean of member rows for a subgraph (dimension k), member rows
/// concatenated in walk order and zero-padded to `l * k` for a walk.
/// Empty states encode to zeros.
pub fn encode_state(state: &EnvState, z: &Tensor, l: usize) -> Result<Vec<f64>> {
    let (n, k) = matrix_dims(z)?;
    match &state.body {
        StateBody::Subgraph(s) => {
            check_ids(s.nodes(), n)?;
            let mut out = vec![0.0; k];
            for &v in s.nodes() {
                for (c, slot) in out.iter_mut().enumerate() {
                    *slot += z.data()[v * k + c];
                }
            }
            if !s.is_empty() {
                let inv = 1.0 / s.len() as f64;
                for slot in &mut out {
                    *slot *= inv;
                }
            }
            Ok(out)
        }
        StateBody::Walk(w) => {
            check_ids(w.sequence(), n)?;
            if w.len() > l {
                return Err(Error::contract(format!(
                    "walk of length {} exceeds encoding bound {l}",
                    w.len()
                )));
            }
            let mut out = vec![0.0; l * k];
            for (i, &v) in w.sequence().iter().enumerate() {
                out[i * k..(i + 1) * k].copy_from_slice(&z.data()[v * k..(v + 1) * k]);
            }
            Ok(out)
        }
    }
}

/// Taped twin of [`encode_state`], for losses that differentiate through
/// the embeddings.
pub fn encode_state_taped(tape: &mut Tape, state: &EnvState, z: ValueId, l: usize) -> Result<ValueId> {
    match &state.body {
        StateBody::Subgraph(s) => tape.mean_rows(z, s.nodes()),
        StateBody::Walk(w) => {
            let k = tape.value(z).cols();
            if w.len() > l {
                return Err(Error::contract(format!(
                    "walk of length {} exceeds encoding bound {l}",
                    w.len()
                )));
            }
            tape.concat_rows_padded(z, w.sequence(), l * k)
        }
    }
}

/// Dimension of [`encode_state`]'s output for a given process kind.
pub fn encoding_dim(kind: MdpKind, k: usize, l: usize) -> usize {
    match kind {
        MdpKind::SubgraphGeneration => k,
        MdpKind::WalkExploration => l * k,
    }
}

/// Downstream loss of a state under the frozen output model. Deterministic
/// for fixed parameters and defined on the empty state.
pub trait RewardEvaluator {
    fn loss(&self, state: &EnvState) -> Result<f64>;
}

/// Loss decrease achieved by taking `action` in `state`: positive when the
/// action helped the downstream task.
pub fn reward(
    state: &EnvState,
    action: usize,
    next_state: &EnvState,
    evaluator: &dyn RewardEvaluator,
) -> Result<f64> {
    let _ = action;
    Ok(evaluator.loss(state)? - evaluator.loss(next_state)?)
}

fn matrix_dims(z: &Tensor) -> Result<(usize, usize)> {
    let shape = z.shape();
    if shape.len() != 2 {
        return Err(Error::contract(format!(
            "embeddings must be a matrix, got shape {shape:?}"
        )));
    }
    Ok((shape[0], shape[1]))
}

fn check_ids(ids: &[usize], n: usize) -> Result<()> {
    if let Some(&bad) = ids.iter().find(|&&v| v >= n) {
        return Err(Error::contract(format!(
            "state references node {bad} outside the {n}-row embedding matrix"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn walk_cfg(l: usize) -> EnvConfig {
        EnvConfig::new(MdpKind::WalkExploration, l).unwrap()
    }

    fn sub_cfg(n: usize) -> EnvConfig {
        EnvConfig::new(MdpKind::SubgraphGeneration, n).unwrap()
    }

    fn walk_state(g: &Graph, seq: &[usize]) -> EnvState {
        EnvState {
            graph_index: 0,
            body: StateBody::Walk(WalkState::new(g, seq.to_vec()).unwrap()),
        }
    }

    fn sub_state(g: &Graph, nodes: &[usize]) -> EnvState {
        EnvState {
            graph_index: 0,
            body: StateBody::Subgraph(g.induced_subgraph(nodes).unwrap()),
        }
    }

    #[test]
    fn initial_states_are_empty_with_all_nodes_candidate() {
        let g = path(4);
        for cfg in [walk_cfg(3), sub_cfg(3)] {
            let s = initial_state(&g, 0, &cfg).unwrap();
            assert_eq!(s.step(), 0);
            assert_eq!(feasible_actions(&g, &s), vec![0, 1, 2, 3]);
            assert!(!is_terminal(&g, &s, &cfg));
        }
    }

    #[test]
    fn empty_graph_rejected() {
        let g = Graph::from_edges(0, &[]).unwrap();
        assert!(matches!(
            initial_state(&g, 0, &walk_cfg(2)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn walk_actions_are_endpoint_neighbors() {
        let g = path(3);
        let s = walk_state(&g, &[1]);
        assert_eq!(feasible_actions(&g, &s), vec![0, 2]);
    }

    #[test]
    fn subgraph_actions_are_border_neighborhood() {
        let g = path(4);
        let s = sub_state(&g, &[1, 2]);
        assert_eq!(feasible_actions(&g, &s), vec![0, 3]);
    }

    #[test]
    fn saturated_subgraph_has_no_actions_and_terminates() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let s = sub_state(&g, &[0, 1, 2, 3]);
        assert!(feasible_actions(&g, &s).is_empty());
        assert!(is_terminal(&g, &s, &sub_cfg(10)));
    }

    #[test]
    fn walk_transition_appends() {
        let g = path(3);
        let s = walk_state(&g, &[0, 1]);
        let s2 = apply_action(&g, &s, 2).unwrap();
        assert_eq!(s2.covered_nodes(), vec![0, 1, 2]);
        assert_eq!(s2.step(), 3);
    }

    #[test]
    fn walk_backtrack_is_legal() {
        let g = path(3);
        let s = walk_state(&g, &[0, 1]);
        let s2 = apply_action(&g, &s, 0).unwrap();
        match &s2.body {
            StateBody::Walk(w) => assert_eq!(w.sequence(), &[0, 1, 0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn subgraph_transition_adds_all_connecting_edges() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = sub_state(&g, &[0, 1]);
        let s2 = apply_action(&g, &s, 2).unwrap();
        match &s2.body {
            StateBody::Subgraph(sub) => {
                assert_eq!(sub.nodes(), &[0, 1, 2]);
                assert_eq!(sub.edges().len(), 3);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn infeasible_action_is_contract_error() {
        let g = path(4);
        let s = walk_state(&g, &[0]);
        assert!(matches!(apply_action(&g, &s, 3), Err(Error::Contract(_))));
    }

    #[test]
    fn walk_terminates_at_length_bound() {
        let g = path(3);
        let cfg = walk_cfg(2);
        let s = walk_state(&g, &[0, 1]);
        assert!(is_terminal(&g, &s, &cfg));
    }

    #[test]
    fn subgraph_encoding_is_row_mean() {
        let g = path(2);
        let z = Tensor::matrix(2, 2, vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let s = sub_state(&g, &[0, 1]);
        assert_eq!(encode_state(&s, &z, 4).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn walk_encoding_concatenates_and_pads() {
        let g = path(2);
        let z = Tensor::matrix(2, 2, vec![1.0, 2.0, 5.0, 6.0]).unwrap();
        let s = walk_state(&g, &[0]);
        assert_eq!(
            encode_state(&s, &z, 3).unwrap(),
            vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn empty_states_encode_to_zeros() {
        let g = path(2);
        let z = Tensor::matrix(2, 2, vec![9.0; 4]).unwrap();
        let w = initial_state(&g, 0, &walk_cfg(3)).unwrap();
        assert_eq!(encode_state(&w, &z, 3).unwrap(), vec![0.0; 6]);
        let s = initial_state(&g, 0, &sub_cfg(3)).unwrap();
        assert_eq!(encode_state(&s, &z, 3).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn taped_and_plain_encodings_agree() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let z = Tensor::matrix(4, 3, (0..12).map(f64::from).collect()).unwrap();
        let states = [
            walk_state(&g, &[2, 3, 0]),
            sub_state(&g, &[0, 1, 2]),
            initial_state(&g, 0, &walk_cfg(5)).unwrap(),
        ];
        for s in &states {
            let plain = encode_state(s, &z, 5).unwrap();
            let mut tape = Tape::new();
            let zid = tape.constant(z.clone());
            let enc = encode_state_taped(&mut tape, s, zid, 5).unwrap();
            assert_eq!(tape.value(enc).data(), plain.as_slice());
        }
    }

    struct CoverageLoss;

    impl RewardEvaluator for CoverageLoss {
        fn loss(&self, state: &EnvState) -> Result<f64> {
            Ok(1.0 / (1.0 + state.covered_nodes().len() as f64))
        }
    }

    #[test]
    fn reward_is_loss_decrease() {
        let g = path(3);
        let s = walk_state(&g, &[0]);
        let s2 = apply_action(&g, &s, 1).unwrap();
        let r = reward(&s, 1, &s2, &CoverageLoss).unwrap();
        assert!((r - (0.5 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn trajectory_rewards_telescope() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let cfg = walk_cfg(6);
        let mut s = initial_state(&g, 0, &cfg).unwrap();
        let mut total = 0.0;
        let first = CoverageLoss.loss(&s).unwrap();
        let mut step = 0;
        while !is_terminal(&g, &s, &cfg) {
            let actions = feasible_actions(&g, &s);
            let a = actions[step % actions.len()];
            let s2 = apply_action(&g, &s, a).unwrap();
            total += reward(&s, a, &s2, &CoverageLoss).unwrap();
            s = s2;
            step += 1;
        }
        let last = CoverageLoss.loss(&s).unwrap();
        assert!((total - (first - last)).abs() < 1e-12);
    }
}

#[cfg(test)]
mod oracle {
    //! Equivalence of feasible_actions/apply_action with direct evaluation
    //! of the set definitions, over every reachable state of small random
    //! graphs. The exhaustive sweep over all graphs up to 7 nodes runs in
    //! the acceptance suite.

    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    pub(crate) fn brute_feasible(g: &Graph, state: &EnvState) -> Vec<usize> {
        match &state.body {
            StateBody::Walk(w) => match w.last() {
                None => (0..g.node_count()).collect(),
                Some(last) => (0..g.node_count()).filter(|&v| g.has_edge(last, v)).collect(),
            },
            StateBody::Subgraph(s) => {
                if s.is_empty() {
                    return (0..g.node_count()).collect();
                }
                (0..g.node_count())
                    .filter(|&u| !s.contains(u) && s.nodes().iter().any(|&v| g.has_edge(u, v)))
                    .collect()
            }
        }
    }

    pub(crate) fn check_all_reachable(g: &Graph, cfg: &EnvConfig) {
        let init = initial_state(g, 0, cfg).unwrap();
        let mut frontier = vec![init];
        let mut seen = BTreeSet::new();
        while let Some(s) = frontier.pop() {
            let key = format!("{:?}", s.body);
            if !seen.insert(key) {
                continue;
            }
            let fast = feasible_actions(g, &s);
            assert_eq!(fast, brute_feasible(g, &s), "state {:?}", s.body);
            if is_terminal(g, &s, cfg) {
                continue;
            }
            for a in fast {
                let s2 = apply_action(g, &s, a).unwrap();
                // Transition oracle: membership and edge closure.
                match (&s.body, &s2.body) {
                    (StateBody::Walk(w), StateBody::Walk(w2)) => {
                        let mut expect = w.sequence().to_vec();
                        expect.push(a);
                        assert_eq!(w2.sequence(), expect.as_slice());
                    }
                    (StateBody::Subgraph(sub), StateBody::Subgraph(sub2)) => {
                        let mut expect: Vec<usize> = sub.nodes().to_vec();
                        expect.push(a);
                        expect.sort_unstable();
                        assert_eq!(sub2.nodes(), expect.as_slice());
                        let inside: BTreeSet<usize> = expect.iter().copied().collect();
                        let expect_edges: Vec<(usize, usize)> = g
                            .edges()
                            .into_iter()
                            .filter(|&(u, v)| inside.contains(&u) && inside.contains(&v))
                            .collect();
                        assert_eq!(sub2.edges(), expect_edges.as_slice());
                    }
                    _ => unreachable!(),
                }
                frontier.push(s2);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reachable_states_match_definitions(
            n in 2usize..6,
            mask in proptest::collection::vec(any::<bool>(), 15),
        ) {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .collect();
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask[*i])
                .map(|(_, &e)| e)
                .collect();
            let g = Graph::from_edges(n, &edges).unwrap();
            check_all_reachable(&g, &EnvConfig::new(MdpKind::SubgraphGeneration, n).unwrap());
            check_all_reachable(&g, &EnvConfig::new(MdpKind::WalkExploration, 4).unwrap());
        }
    }
}
