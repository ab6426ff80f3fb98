//! Scratch upper-bound probe: trains ONLY the classifier half on walks
//! forced through the planted motif (covering walk of the motif nodes).
//! If this cannot separate the classes, the encoder/decoder path is the
//! problem; if it can, the sampler's exploration is.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walkgnn::data::generate_ba2motifs;
use walkgnn::env::{EnvState, MdpKind, StateBody};
use walkgnn::nn::params::ParameterStore;
use walkgnn::nn::tape::Tape;
use walkgnn::pipeline::{build_models, init_params, output_forward, TrainConfig};

fn main() {
    let epochs: usize = std::env::var("EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(60);
    let cfg = TrainConfig {
        kind: MdpKind::WalkExploration,
        max_steps: 16,
        k_samples: 1,
        embed_dim: std::env::var("EMBED").ok().and_then(|v| v.parse().ok()).unwrap_or(16),
        hidden_dim: 16,
        q_hidden: vec![32],
        ..TrainConfig::default()
    };
    let (ds, ann) = generate_ba2motifs(200, 20, 1, 0).unwrap();
    let (sm, om) = build_models(&cfg, ds.feature_dim, ds.num_classes).unwrap();
    let mut store = ParameterStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    init_params(&sm, &om, &mut store, &mut rng).unwrap();

    // Forced state: covering walk of the 5 motif nodes.
    let forced: Vec<EnvState> = (0..ds.len())
        .map(|i| EnvState {
            graph_index: i,
            body: StateBody::Walk(ds.graphs[i].covering_walk(&ann[i].nodes).unwrap()),
        })
        .collect();

    let l = sm.env.max_steps;
    let train: Vec<usize> = (0..180).collect();
    let val: Vec<usize> = (180..200).collect();
    let names: Vec<String> = ["theta_out.", "decoder."]
        .iter()
        .flat_map(|p| store.names_with_prefix(p))
        .collect();

    for epoch in 0..epochs {
        for chunk in train.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let mut terms = Vec::new();
            for &i in chunk {
                let logits = output_forward(
                    &mut tape, &store, &om, &ds.graphs[i], &ds.features[i],
                    std::slice::from_ref(&forced[i]), l,
                )
                .unwrap();
                terms.push(tape.softmax_cross_entropy(logits, ds.labels[i]).unwrap());
            }
            let sum = tape.sum(&terms).unwrap();
            let loss = tape.scale(sum, 1.0 / chunk.len() as f64);
            let grads = tape.backward(loss).unwrap();
            store.adam_step(&grads, &names, cfg.lr_output).unwrap();
        }
        if epoch % 10 == 9 || epoch + 1 == epochs {
            let acc = |idx: &[usize]| -> f64 {
                let mut ok = 0;
                for &i in idx {
                    let mut tape = Tape::new();
                    let logits_id = output_forward(
                        &mut tape, &store, &om, &ds.graphs[i], &ds.features[i],
                        std::slice::from_ref(&forced[i]), l,
                    )
                    .unwrap();
                    let logits = tape.value(logits_id).data().to_vec();
                    let pred = (0..logits.len())
                        .max_by(|&a, &b| logits[a].partial_cmp(&logits[b]).unwrap())
                        .unwrap();
                    if pred == ds.labels[i] {
                        ok += 1;
                    }
                }
                ok as f64 / idx.len() as f64
            };
            println!("epoch {epoch}: train {:.3} val {:.3}", acc(&train), acc(&val));
        }
    }
}
