//! End-to-end training at demo scale: generate a two-motif dataset, train
//! the sampler and classifier with 3-fold cross-validation, and print the
//! per-fold learning curve. Takes on the order of a minute; scale the
//! knobs up for real runs (the CLI defaults match the full protocol).

use walkgnn::data::generate_ba2motifs;
use walkgnn::env::MdpKind;
use walkgnn::pipeline::{evaluate_cv, TrainConfig};

fn main() {
    let (ds, _) = generate_ba2motifs(60, 15, 1, 1).unwrap();

    let cfg = TrainConfig {
        kind: MdpKind::WalkExploration,
        max_steps: 10,
        k_samples: 2,
        epochs: 12,
        batch_size: 16,
        embed_dim: 12,
        hidden_dim: 12,
        q_hidden: vec![24],
        seed: 1,
        ..TrainConfig::default()
    };

    let metrics = evaluate_cv(&ds, &cfg, 3, None).unwrap();
    for fold in &metrics.folds {
        let accs: Vec<f64> = fold.records.iter().map(|r| r.val_acc).collect();
        println!(
            "fold {}: best val acc {:.3} at epoch {} (curve {:.2?})",
            fold.fold, fold.best_val_acc, fold.best_epoch, accs
        );
    }
    println!(
        "mean best val acc {:.3} +- {:.3} in {:.1}s",
        metrics.mean_best_val_acc, metrics.std_best_val_acc, metrics.wall_time_secs
    );
}
