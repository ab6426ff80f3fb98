//! Counts cumulative candidate-action evaluations along random rollouts
//! for both MDPs. On sparse graphs the walk explorer's count grows
//! linearly with the step budget while the subgraph builder's border
//! keeps widening, which is the whole case for walk-based sampling.

use walkgnn::bench::{bench_rows, GraphFamily};

fn main() {
    let seeds: Vec<u64> = (0..10).collect();
    let rows = bench_rows(GraphFamily::Ba, &[100], 12, 12, &seeds).unwrap();

    // Average the cumulative counts per step over the seeds.
    let avg = |kind: &str| -> Vec<f64> {
        (1..=12)
            .map(|t| {
                let xs: Vec<usize> = rows
                    .iter()
                    .filter(|r| walkgnn::bench::kind_name(r.kind) == kind && r.steps == t)
                    .map(|r| r.cumulative_candidates)
                    .collect();
                xs.iter().sum::<usize>() as f64 / xs.len() as f64
            })
            .collect()
    };

    let walk = avg("walk");
    let subgraph = avg("subgraph");
    println!("step | walk cumulative | subgraph cumulative");
    for t in 0..12 {
        println!("{:>4} | {:>15.1} | {:>19.1}", t + 1, walk[t], subgraph[t]);
    }

    // Per-step increments: flat for walks, widening for subgraphs.
    let walk_incr: Vec<f64> = walk.windows(2).map(|w| w[1] - w[0]).collect();
    let sub_incr: Vec<f64> = subgraph.windows(2).map(|w| w[1] - w[0]).collect();
    println!("\nwalk increments      {walk_incr:.1?}");
    println!("subgraph increments  {sub_incr:.1?}");
}
