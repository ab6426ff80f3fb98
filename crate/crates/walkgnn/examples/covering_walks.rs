//! Every connected node set admits a walk that visits all of its nodes in
//! at most 2|V'| - 1 steps. This demo builds a lollipop graph (triangle
//! plus a tail) and prints the covering walk for a few subsets.

use walkgnn::graph::Graph;

fn main() {
    // 0-1-2 triangle, tail 2-3-4-5.
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5)]).unwrap();

    for nodes in [
        vec![0, 1, 2],
        vec![2, 3, 4, 5],
        vec![0, 1, 2, 3, 4, 5],
        vec![4],
    ] {
        let walk = g.covering_walk(&nodes).unwrap();
        let bound = 2 * nodes.len() - 1;
        println!(
            "set {:?} -> walk {:?} (len {}, bound {})",
            nodes,
            walk.sequence(),
            walk.len(),
            bound
        );
        assert!(walk.len() <= bound);
        assert!(nodes.iter().all(|v| walk.visited().contains(v)));
    }

    // Disconnected sets have no covering walk.
    let err = g.covering_walk(&[0, 5]).unwrap_err();
    println!("set [0, 5] -> {err}");
}
