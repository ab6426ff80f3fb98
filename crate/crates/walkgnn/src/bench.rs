//! Action-space cost benchmark: counts how many candidate actions a policy
//! must score along a rollout, under both process kinds. Walk candidate
//! sets stay near the endpoint degree, so the cumulative count grows
//! linearly in the step bound; subgraph borders widen as the subgraph
//! grows, so the count grows superlinearly. The CSV rows written here are
//! the empirical record of that comparison.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ba2motifs::ba_edges;
use crate::env::{apply_action, feasible_actions, initial_state, EnvConfig, MdpKind};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Attachment count for benchmark BA graphs. Two edges per new node keeps
/// borders visibly widening; a single edge would give near-tree graphs
/// whose borders grow too slowly to separate the two curves at n = 100.
pub const BENCH_BA_ATTACH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    Path,
    Cycle,
    Tree,
    Ba,
    Complete,
}

impl GraphFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(GraphFamily::Path),
            "cycle" => Ok(GraphFamily::Cycle),
            "tree" => Ok(GraphFamily::Tree),
            "ba" => Ok(GraphFamily::Ba),
            "complete" => Ok(GraphFamily::Complete),
            other => Err(Error::input(format!(
                "unknown graph family {other:?}; expected path, cycle, tree, ba, or complete"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GraphFamily::Path => "path",
            GraphFamily::Cycle => "cycle",
            GraphFamily::Tree => "tree",
            GraphFamily::Ba => "ba",
            GraphFamily::Complete => "complete",
        }
    }
}

/// Benchmark instance of a family. Only `ba` consumes the seed; the other
/// families are deterministic in `n`. Trees are complete binary trees with
/// node `i`'s children at `2i+1` and `2i+2`.
pub fn family_graph(family: GraphFamily, n: usize, seed: u64) -> Result<Graph> {
    match family {
        GraphFamily::Path => {
            let edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphFamily::Cycle => {
            if n < 3 {
                return Err(Error::input(format!("cycle needs at least 3 nodes, got {n}")));
            }
            let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
            edges.push((n - 1, 0));
            Graph::from_edges(n, &edges)
        }
        GraphFamily::Tree => {
            let edges: Vec<(usize, usize)> = (1..n).map(|v| ((v - 1) / 2, v)).collect();
            Graph::from_edges(n, &edges)
        }
        GraphFamily::Ba => {
            if n <= BENCH_BA_ATTACH {
                return Err(Error::input(format!(
                    "ba needs more than {BENCH_BA_ATTACH} nodes, got {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Graph::from_edges(n, &ba_edges(n, BENCH_BA_ATTACH, &mut rng))
        }
        GraphFamily::Complete => {
            let mut edges = Vec::with_capacity(n * (n - 1) / 2);
            for u in 0..n {
                for v in u + 1..n {
                    edges.push((u, v));
                }
            }
            Graph::from_edges(n, &edges)
        }
    }
}

/// Cumulative candidate counts along one rollout: entry `t` is the total
/// number of feasible actions evaluated over the first `t + 1` decisions
/// (the first is always the all-nodes initial set). Actions follow the
/// `forced` prefix, then uniform random. Stops early if the process
/// terminates.
pub fn candidate_prefix_sums(
    graph: &Graph,
    kind: MdpKind,
    max_steps: usize,
    forced: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let cfg = EnvConfig::new(kind, max_steps)?;
    let mut state = initial_state(graph, 0, &cfg)?;
    let mut sums = Vec::with_capacity(max_steps);
    let mut total = 0;
    for t in 0..max_steps {
        let actions = feasible_actions(graph, &state);
        if actions.is_empty() {
            break;
        }
        total += actions.len();
        sums.push(total);
        let action = match forced.get(t) {
            Some(&a) => a,
            None => actions[rng.gen_range(0..actions.len())],
        };
        state = apply_action(graph, &state, action)?;
    }
    Ok(sums)
}

/// One CSV row: cumulative candidate count after `steps` decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub family: &'static str,
    pub n: usize,
    pub kind: MdpKind,
    pub steps: usize,
    pub cumulative_candidates: usize,
}

pub fn kind_name(kind: MdpKind) -> &'static str {
    match kind {
        MdpKind::WalkExploration => "walk",
        MdpKind::SubgraphGeneration => "subgraph",
    }
}

/// Runs the benchmark grid: every (size, seed) instance of the family,
/// under both process kinds, recording a row per rollout prefix length.
/// Random-policy rollout RNG is derived from the seed, so reruns are
/// byte-identical.
pub fn bench_rows(
    family: GraphFamily,
    sizes: &[usize],
    walk_steps: usize,
    subgraph_steps: usize,
    seeds: &[u64],
) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::input("benchmark needs at least one size and one seed".to_string()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        for &seed in seeds {
            let graph = family_graph(family, n, seed)?;
            for (kind, bound) in [
                (MdpKind::WalkExploration, walk_steps),
                (MdpKind::SubgraphGeneration, subgraph_steps),
            ] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let sums = candidate_prefix_sums(&graph, kind, bound, &[], &mut rng)?;
                for (t, &cum) in sums.iter().enumerate() {
                    rows.push(BenchRow {
                        family: family.name(),
                        n,
                        kind,
                        steps: t + 1,
                        cumulative_candidates: cum,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Plain CSV with a header, '.' decimals (all integers here), LF endings.
pub fn write_csv<W: Write>(mut w: W, rows: &[BenchRow]) -> Result<()> {
    w.write_all(b"family,n,kind,steps,cumulative_candidates\n")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.family,
            r.n,
            kind_name(r.kind),
            r.steps,
            r.cumulative_candidates
        )?;
    }
    Ok(())
}
