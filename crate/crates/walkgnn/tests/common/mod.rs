//! Shared helpers for the integration suites: a canonical-form enumerator
//! for small connected graphs and brute-force re-derivations of the two
//! MDPs' candidate-set formulas.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use walkgnn::env::{EnvState, StateBody};
use walkgnn::graph::Graph;

/// Edge bitmask over the `n*(n-1)/2` unordered pairs of `0..n`, pair
/// `(i, j)` with `i < j` at bit `index(i, j)`.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    // Pairs are laid out row by row: (0,1), (0,2), ..., (0,n-1), (1,2), ...
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn mask_connected(n: usize, mask: u32) -> bool {
    if n == 0 {
        return false;
    }
    let mut seen = 1u32; // node 0
    let mut frontier = vec![0usize];
    while let Some(v) = frontier.pop() {
        for u in 0..n {
            if u == v || seen & (1 << u) != 0 {
                continue;
            }
            let (a, b) = if v < u { (v, u) } else { (u, v) };
            if mask & (1 << pair_index(n, a, b)) != 0 {
                seen |= 1 << u;
                frontier.push(u);
            }
        }
    }
    seen.count_ones() as usize == n
}

/// Relabels the edge mask by `perm` (new label of old node `i` is `perm[i]`).
fn permute_mask(n: usize, mask: u32, perm: &[usize]) -> u32 {
    let mut out = 0u32;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask & (1 << pair_index(n, i, j)) != 0 {
                let (a, b) = if perm[i] < perm[j] {
                    (perm[i], perm[j])
                } else {
                    (perm[j], perm[i])
                };
                out |= 1 << pair_index(n, a, b);
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

fn mask_to_graph(n: usize, mask: u32) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if mask & (1 << pair_index(n, i, j)) != 0 {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("mask edges are simple by construction")
}

/// Every connected graph on exactly `n` nodes (`n <= 6`), one representative
/// per isomorphism class. Canonical form = the minimum edge bitmask over all
/// node relabelings, so two masks collide iff the graphs are isomorphic.
pub fn connected_graphs_exactly(n: usize) -> Vec<Graph> {
    assert!(n >= 1 && n <= 6, "exhaustive enumeration is sized for n <= 6");
    let bits = n * (n - 1) / 2;
    let perms = permutations(n);
    let mut canon: BTreeSet<u32> = BTreeSet::new();
    for mask in 0..(1u32 << bits) {
        if !mask_connected(n, mask) {
            continue;
        }
        let min_mask = perms
            .iter()
            .map(|p| permute_mask(n, mask, p))
            .min()
            .expect("at least the identity permutation");
        canon.insert(min_mask);
    }
    canon.into_iter().map(|m| mask_to_graph(n, m)).collect()
}

/// Uniform random connected graph on `n` nodes: G(n, 0.4) resampled until
/// connected (a handful of tries at n = 7).
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(n, &edges).expect("simple by construction");
        if g.is_connected(&(0..n).collect::<Vec<_>>()).unwrap() {
            return g;
        }
    }
}

/// All nonempty node subsets whose induced subgraph is connected.
pub fn connected_subsets(graph: &Graph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if graph.is_connected(&nodes).unwrap() {
            out.push(nodes);
        }
    }
    out
}

/// Candidate set recomputed straight from the definitions, independent of
/// the env module: empty state offers every node; a subgraph offers the
/// border neighborhood (union of member neighbor sets minus members); a
/// walk offers the neighbors of its endpoint, revisits included.
pub fn candidates_by_definition(graph: &Graph, state: &EnvState) -> Vec<usize> {
    let set: BTreeSet<usize> = match &state.body {
        StateBody::Subgraph(sub) => {
            let members: Vec<usize> = sub.nodes().to_vec();
            if members.is_empty() {
                (0..graph.node_count()).collect()
            } else {
                let member_set: BTreeSet<usize> = members.iter().copied().collect();
                members
                    .iter()
                    .flat_map(|&v| graph.neighbors(v).unwrap().iter().copied())
                    .filter(|v| !member_set.contains(v))
                    .collect()
            }
        }
        StateBody::Walk(walk) => match walk.sequence().last() {
            None => (0..graph.node_count()).collect(),
            Some(&end) => graph.neighbors(end).unwrap().iter().copied().collect(),
        },
    };
    set.into_iter().collect()
}

/// Coefficient of determination of the least-squares line through
/// `(xs, ys)`.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}
