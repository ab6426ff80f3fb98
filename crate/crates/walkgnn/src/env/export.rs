//! Exports of extracted substructures: DOT with the extraction highlighted,
//! and a JSON record per graph.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;

use super::{EnvState, MdpKind, StateBody};

/// One extraction result in serializable form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub graph_index: usize,
    /// "walk" or "subgraph".
    pub kind: String,
    /// Distinct extracted nodes, sorted.
    pub nodes: Vec<usize>,
    /// Induced edges of an extracted subgraph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    /// Node sequence of an extracted walk.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk: Option<Vec<usize>>,
    /// Policy-net value of each action taken, in trajectory order.
    pub q_values: Vec<f64>,
}

impl ExtractionRecord {
    pub fn new(state: &EnvState, q_values: Vec<f64>) -> Self {
        match &state.body {
            StateBody::Walk(w) => ExtractionRecord {
                graph_index: state.graph_index,
                kind: "walk".to_string(),
                nodes: state.covered_nodes(),
                edges: None,
                walk: Some(w.sequence().to_vec()),
                q_values,
            },
            StateBody::Subgraph(s) => ExtractionRecord {
                graph_index: state.graph_index,
                kind: "subgraph".to_string(),
                nodes: state.covered_nodes(),
                edges: Some(s.edges().to_vec()),
                walk: None,
                q_values,
            },
        }
    }

    pub fn mdp_kind(&self) -> MdpKind {
        if self.kind == "walk" {
            MdpKind::WalkExploration
        } else {
            MdpKind::SubgraphGeneration
        }
    }
}

/// Distinct edges the extraction uses: walk steps (deduplicated) or the
/// induced subgraph edges.
fn extracted_edges(state: &EnvState) -> Vec<(usize, usize)> {
    match &state.body {
        StateBody::Subgraph(s) => s.edges().to_vec(),
        StateBody::Walk(w) => {
            let mut edges: Vec<(usize, usize)> = w
                .sequence()
                .windows(2)
                .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
                .collect();
            edges.sort_unstable();
            edges.dedup();
            edges
        }
    }
}

/// Renders the whole host graph in DOT, with extracted nodes and edges
/// carrying a highlight color and doubled pen width.
pub fn to_dot(graph: &Graph, state: &EnvState, name: &str) -> Result<String> {
    let hot_nodes: std::collections::BTreeSet<usize> = state.covered_nodes().into_iter().collect();
    let hot_edges: std::collections::BTreeSet<(usize, usize)> =
        extracted_edges(state).into_iter().collect();
    let mut out = String::new();
    out.push_str(&format!("graph {name} {{\n"));
    out.push_str("  node [shape=circle];\n");
    for v in 0..graph.node_count() {
        if hot_nodes.contains(&v) {
            out.push_str(&format!(
                "  {v} [style=filled, fillcolor=indianred1, penwidth=2.0];\n"
            ));
        } else {
            out.push_str(&format!("  {v};\n"));
        }
    }
    for (u, v) in graph.edges() {
        if hot_edges.contains(&(u, v)) {
            out.push_str(&format!("  {u} -- {v} [color=red, penwidth=2.0];\n"));
        } else {
            out.push_str(&format!("  {u} -- {v};\n"));
        }
    }
    out.push_str("}\n");
    Ok(out)
}
