//! Immutable undirected graphs and the substructure primitives built on them.
//!
//! Node ids are dense 0-based integers. Graphs are simple (no self-loops,
//! no parallel edges) and never mutated after construction, so they can be
//! shared freely across workers. The two substructure state types live here
//! too: [`WalkState`] (a node sequence along edges) and [`SubgraphState`]
//! (a connected node set with its induced edges).

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Immutable undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list over `node_count` nodes.
    ///
    /// Parallel edges are deduplicated silently; self-loops are rejected
    /// because every substructure definition downstream assumes a simple
    /// graph.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) references a node outside [0, {node_count})"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-loop on node {u} is not allowed")));
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        let edge_count = sets.iter().map(BTreeSet::len).sum::<usize>() / 2;
        let adjacency = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(Graph {
            adjacency,
            edge_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.adjacency
            .get(v)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::input(format!("node {v} outside [0, {})", self.node_count())))
    }

    /// Unchecked neighbor access for internal callers that already validated `v`.
    pub(crate) fn adj(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.neighbors(v).map(<[usize]>::len)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency
            .get(u)
            .is_some_and(|adj| adj.binary_search(&v).is_ok())
    }

    /// All edges as `(u, v)` pairs with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, adj) in self.adjacency.iter().enumerate() {
            for &v in adj {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Whether the subgraph induced by `nodes` is connected.
    ///
    /// The empty set and singletons count as connected; the convention lets
    /// the generation processes start from an empty substructure without a
    /// special case.
    pub fn is_connected(&self, nodes: &[usize]) -> Result<bool> {
        let set = self.validated_set(nodes)?;
        if set.len() <= 1 {
            return Ok(true);
        }
        let start = *set.iter().next().unwrap();
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in self.adj(u) {
                if set.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        Ok(seen.len() == set.len())
    }

    /// The subgraph induced by a connected node set: the nodes plus every
    /// edge of the host graph with both endpoints inside.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<SubgraphState> {
        if !self.is_connected(nodes)? {
            return Err(Error::constraint(format!(
                "node set {nodes:?} is not connected in the host graph"
            )));
        }
        let set: BTreeSet<usize> = nodes.iter().copied().collect();
        let mut edges = Vec::new();
        for &u in &set {
            for &v in self.adj(u) {
                if u < v && set.contains(&v) {
                    edges.push((u, v));
                }
            }
        }
        Ok(SubgraphState {
            nodes: set.into_iter().collect(),
            edges,
        })
    }

    /// A walk inside the subgraph induced by `nodes` that visits every node
    /// of the set at least once, with at most `2 * |nodes| - 1` entries.
    ///
    /// Construction: depth-first traversal of a spanning tree rooted at a
    /// minimum-degree node (ties to the smallest id), emitting each
    /// backtrack step, then dropping the trailing pure-backtrack suffix.
    pub fn covering_walk(&self, nodes: &[usize]) -> Result<WalkState> {
        let set = self.validated_set(nodes)?;
        if set.is_empty() {
            return Err(Error::constraint(
                "covering walk requires a nonempty node set".to_string(),
            ));
        }
        if !self.is_connected(nodes)? {
            return Err(Error::constraint(format!(
                "node set {nodes:?} is not connected in the host graph"
            )));
        }
        let induced_degree = |v: usize| self.adj(v).iter().filter(|w| set.contains(w)).count();
        let root = *set
            .iter()
            .min_by_key(|&&v| (induced_degree(v), v))
            .unwrap();

        // Iterative Euler tour of the DFS spanning tree.
        let mut visited = BTreeSet::from([root]);
        let mut walk = vec![root];
        let mut stack = vec![root];
        while let Some(&u) = stack.last() {
            let next = self
                .adj(u)
                .iter()
                .copied()
                .find(|w| set.contains(w) && !visited.contains(w));
            match next {
                Some(w) => {
                    visited.insert(w);
                    walk.push(w);
                    stack.push(w);
                }
                None => {
                    stack.pop();
                    if let Some(&parent) = stack.last() {
                        walk.push(parent);
                    }
                }
            }
        }
        // Trim the suffix after the last first-visit: it only walks back to
        // the root and adds no coverage.
        let mut seen = BTreeSet::new();
        let mut last_new = 0;
        for (i, &v) in walk.iter().enumerate() {
            if seen.insert(v) {
                last_new = i;
            }
        }
        walk.truncate(last_new + 1);
        debug_assert!(walk.len() <= 2 * set.len() - 1);
        WalkState::new(self, walk)
    }

    fn validated_set(&self, nodes: &[usize]) -> Result<BTreeSet<usize>> {
        for &v in nodes {
            if v >= self.node_count() {
                return Err(Error::input(format!(
                    "node {v} outside [0, {})",
                    self.node_count()
                )));
            }
        }
        Ok(nodes.iter().copied().collect())
    }
}

/// Per-node feature vectors, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl NodeFeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "feature matrix: {} values for {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("feature matrix contains non-finite entries".to_string()));
        }
        Ok(NodeFeatureMatrix { rows, cols, data })
    }

    /// A matrix of identical one-entry rows, for datasets without node labels.
    pub fn constant(rows: usize) -> Self {
        NodeFeatureMatrix {
            rows,
            cols: 1,
            data: vec![1.0; rows],
        }
    }

    /// One-hot rows over an alphabet of size `cols`.
    pub fn one_hot(labels: &[usize], cols: usize) -> Result<Self> {
        let mut data = vec![0.0; labels.len() * cols];
        for (v, &l) in labels.iter().enumerate() {
            if l >= cols {
                return Err(Error::input(format!(
                    "label index {l} outside one-hot width {cols}"
                )));
            }
            data[v * cols + l] = 1.0;
        }
        Ok(NodeFeatureMatrix {
            rows: labels.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.cols..(v + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// A walk: a node sequence whose consecutive pairs are edges of the host
/// graph. Repeats are allowed; the empty walk is legal and serves as the
/// initial generation state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkState {
    sequence: Vec<usize>,
}

impl WalkState {
    pub fn empty() -> Self {
        WalkState { sequence: Vec::new() }
    }

    /// Validates the sequence against the host graph.
    pub fn new(graph: &Graph, sequence: Vec<usize>) -> Result<Self> {
        for &v in &sequence {
            if v >= graph.node_count() {
                return Err(Error::input(format!(
                    "walk node {v} outside [0, {})",
                    graph.node_count()
                )));
            }
        }
        for pair in sequence.windows(2) {
            if !graph.has_edge(pair[0], pair[1]) {
                return Err(Error::constraint(format!(
                    "({}, {}) is not an edge of the host graph",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(WalkState { sequence })
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.sequence.last().copied()
    }

    /// The walk extended by one node. The caller guarantees adjacency; the
    /// MDP transition checks feasibility before calling this.
    pub(crate) fn appended(&self, v: usize) -> WalkState {
        let mut sequence = self.sequence.clone();
        sequence.push(v);
        WalkState { sequence }
    }

    /// Distinct nodes visited by the walk.
    pub fn visited(&self) -> BTreeSet<usize> {
        self.sequence.iter().copied().collect()
    }
}

/// A connected subgraph: a node set plus the induced edges accumulated by
/// the generation process. Equality and hashing use the node set only; the
/// edge set is determined by it.
#[derive(Debug, Clone)]
pub struct SubgraphState {
    /// Sorted ascending.
    nodes: Vec<usize>,
    /// Sorted pairs with `u < v`.
    edges: Vec<(usize, usize)>,
}

impl PartialEq for SubgraphState {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for SubgraphState {}

impl std::hash::Hash for SubgraphState {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.nodes.hash(state);
    }
}

impl SubgraphState {
    pub fn empty() -> Self {
        SubgraphState {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    /// The state extended by node `v` and its connecting edges into the
    /// current node set.
    pub(crate) fn extended(&self, graph: &Graph, v: usize) -> SubgraphState {
        let mut nodes = self.nodes.clone();
        let pos = nodes.binary_search(&v).unwrap_err();
        nodes.insert(pos, v);
        let mut edges = self.edges.clone();
        for &u in graph.adj(v) {
            if self.contains(u) {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        SubgraphState { nodes, edges }
    }
}
