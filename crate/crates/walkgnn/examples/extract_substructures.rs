//! Trains briefly on a two-motif dataset, then extracts the learned walks
//! from a held-out graph and renders them: the JSON record carries the
//! walk and its Q-values, the DOT output highlights the visited nodes.
//!
//! Pipe the DOT into graphviz to look at it:
//!   cargo run --example extract_substructures | sed -n '/^graph/,$p' | dot -Tpng > walk.png

use walkgnn::data::generate_ba2motifs;
use walkgnn::env::export::{to_dot, ExtractionRecord};
use walkgnn::env::MdpKind;
use walkgnn::pipeline::{build_models, infer, train_fold, TrainConfig};

fn main() {
    let (ds, annotations) = generate_ba2motifs(24, 12, 1, 9).unwrap();
    let cfg = TrainConfig {
        kind: MdpKind::WalkExploration,
        max_steps: 12,
        k_samples: 1,
        epochs: 10,
        batch_size: 8,
        embed_dim: 12,
        hidden_dim: 12,
        q_hidden: vec![24],
        seed: 9,
        ..TrainConfig::default()
    };

    // Hold out the last four graphs; train on the rest.
    let train_idx: Vec<usize> = (0..20).collect();
    let val_idx: Vec<usize> = (20..24).collect();
    let (outcome, store) = train_fold(&ds, 0, &train_idx, &val_idx, &cfg, None).unwrap();
    println!("trained: best val acc {:.2}\n", outcome.best_val_acc);

    let (sm, om) = build_models(&cfg, ds.feature_dim, ds.num_classes).unwrap();
    let target = val_idx[0];
    let result = infer(&store, &sm, &om, &ds.graphs[target], &ds.features[target], target, 1).unwrap();
    println!(
        "graph {target}: label {}, predicted {}, motif at {:?}",
        ds.labels[target], result.predicted, annotations[target].nodes
    );

    let state = &result.final_states[0];
    let record = ExtractionRecord::new(state, vec![]);
    println!("walk: {:?}", record.walk.as_ref().unwrap());
    println!();
    print!("{}", to_dot(&ds.graphs[target], state, "extracted").unwrap());
}
