//! Scratch diagnostic: dump the full per-epoch curves for one fold so the
//! train/val gap and loss trajectories are visible.

use walkgnn::data::{generate_ba2motifs, stratified_k_fold};
use walkgnn::env::MdpKind;
use walkgnn::pipeline::{train_fold, Pooling, TrainConfig};

fn main() {
    let fold: usize = std::env::var("FOLD").ok().and_then(|v| v.parse().ok()).unwrap_or(6);
    let cfg = TrainConfig {
        kind: MdpKind::WalkExploration,
        max_steps: 16,
        k_samples: 3,
        epochs: 200,
        batch_size: 16,
        gamma: 0.5,
        eps_start: 0.1,
        eps_end: 0.4,
        seed: 0,
        embed_dim: 16,
        hidden_dim: 16,
        mpnn_layers: 3,
        q_hidden: vec![32],
        pooling: Pooling::Max,
        ..TrainConfig::default()
    };
    let (ds, _) = generate_ba2motifs(200, 20, 1, cfg.seed).unwrap();
    let split = stratified_k_fold(&ds, 10, cfg.seed).unwrap();
    let (outcome, _) = train_fold(
        &ds,
        fold,
        &split.train_indices(fold),
        &split.val_indices(fold),
        &cfg,
        None,
    )
    .unwrap();
    println!("epoch  train_acc  val_acc  sampling_loss  output_loss");
    for r in &outcome.records {
        println!(
            "{:>5}  {:>9.3}  {:>7.2}  {:>13.4}  {:>11.4}",
            r.epoch, r.train_acc, r.val_acc, r.sampling_loss, r.output_loss
        );
    }
}
