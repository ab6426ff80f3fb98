//! Steps both sampler MDPs by hand on the same graph and prints the
//! feasible action set at every decision point, which makes the
//! difference in action-space growth visible: the subgraph builder's
//! candidates are the whole border of the selection, the walk explorer's
//! only the current endpoint's neighbors.

use walkgnn::env::{
    apply_action, feasible_actions, initial_state, is_terminal, EnvConfig, MdpKind,
};
use walkgnn::graph::Graph;

fn main() {
    // Two triangles sharing node 2, plus a pendant.
    let g = Graph::from_edges(
        6,
        &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4), (4, 5)],
    )
    .unwrap();

    for kind in [MdpKind::SubgraphGeneration, MdpKind::WalkExploration] {
        println!("--- {kind:?}, always taking the lowest-id action ---");
        let cfg = EnvConfig::new(kind, 4).unwrap();
        let mut state = initial_state(&g, 0, &cfg).unwrap();
        while !is_terminal(&g, &state, &cfg) {
            let actions = feasible_actions(&g, &state);
            let Some(&a) = actions.first() else { break };
            println!(
                "step {}: covered {:?}, candidates {:?} -> take {a}",
                state.step(),
                state.covered_nodes(),
                actions
            );
            state = apply_action(&g, &state, a).unwrap();
        }
        println!("final: covered {:?}\n", state.covered_nodes());
    }
}
