//! Scratch harness for hyperparameter probing. Reads knobs from env vars,
//! trains the first few folds at full dataset scale, and reports accuracy,
//! walk/motif overlap, and wall time.

use std::time::Instant;

use walkgnn::data::{generate_ba2motifs, stratified_k_fold};
use walkgnn::env::MdpKind;
use walkgnn::pipeline::{build_models, infer, train_fold, TrainConfig};

fn envu(k: &str, d: usize) -> usize {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}
fn envf(k: &str, d: f64) -> f64 {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

fn main() {
    let graphs = envu("GRAPHS", 200);
    let folds_run = envu("FOLDS_RUN", 1);
    let cfg = TrainConfig {
        kind: MdpKind::WalkExploration,
        max_steps: envu("L", 16),
        k_samples: envu("KS", 3),
        epochs: envu("EPOCHS", 30),
        batch_size: envu("BATCH", 16),
        gamma: envf("GAMMA", 0.9),
        beta: envf("BETA", 0.1),
        eps_start: envf("EPS0", 0.1),
        eps_end: envf("EPS1", 0.4),
        lr_sampling: envf("LRS", 1e-3),
        lr_output: envf("LRO", 1e-3),
        seed: envu("SEED", 0) as u64,
        embed_dim: envu("EMBED", 16),
        hidden_dim: envu("HID", 16),
        mpnn_layers: envu("LAYERS", 3),
        q_hidden: vec![envu("QH", 32)],
        pooling: if std::env::var("POOL").as_deref() == Ok("max") {
            walkgnn::pipeline::Pooling::Max
        } else {
            walkgnn::pipeline::Pooling::Mean
        },
        ..TrainConfig::default()
    };
    eprintln!("{cfg:?}");

    let (ds, ann) = generate_ba2motifs(graphs, 20, 1, cfg.seed).unwrap();
    let split = stratified_k_fold(&ds, 10, cfg.seed).unwrap();
    let (sm, om) = build_models(&cfg, ds.feature_dim, ds.num_classes).unwrap();

    let mut bests = Vec::new();
    for f in 0..folds_run {
        let t0 = Instant::now();
        let train_idx = split.train_indices(f);
        let val_idx = split.val_indices(f);
        let (outcome, store) = train_fold(&ds, f, &train_idx, &val_idx, &cfg, None).unwrap();

        // Motif overlap on correctly classified val graphs, both top-1 walk
        // and the union over the K walks.
        let mut correct = 0usize;
        let mut hit_top1 = 0usize;
        let mut hit_union = 0usize;
        for &i in &val_idx {
            let r = infer(&store, &sm, &om, &ds.graphs[i], &ds.features[i], i, cfg.k_samples).unwrap();
            if r.predicted != ds.labels[i] {
                continue;
            }
            correct += 1;
            let motif: std::collections::BTreeSet<usize> = ann[i].nodes.iter().copied().collect();
            let overlap = |nodes: &[usize]| nodes.iter().filter(|v| motif.contains(v)).count();
            if overlap(&r.final_states[0].covered_nodes()) >= 3 {
                hit_top1 += 1;
            }
            let union: Vec<usize> = r
                .final_states
                .iter()
                .flat_map(|s| s.covered_nodes())
                .collect();
            let distinct: std::collections::BTreeSet<usize> = union.into_iter().collect();
            let in_motif = distinct.iter().filter(|v| motif.contains(v)).count();
            if in_motif >= 3 {
                hit_union += 1;
            }
        }
        println!(
            "fold {f}: best {:.3} at epoch {}, last-5 val {:.2?}, correct {correct}/{}, motif top1 {hit_top1}/{correct}, union {hit_union}/{correct}, {:.1}s",
            outcome.best_val_acc,
            outcome.best_epoch,
            outcome.records.iter().rev().take(5).map(|r| r.val_acc).collect::<Vec<_>>(),
            val_idx.len(),
            t0.elapsed().as_secs_f64()
        );
        bests.push(outcome.best_val_acc);
    }
    let mean = bests.iter().sum::<f64>() / bests.len() as f64;
    println!("mean best over {} folds: {mean:.3}", bests.len());
}
