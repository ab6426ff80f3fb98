//! Stratified k-fold assignment: per-class shuffle, then continuous
//! round-robin dealing, so per-fold class counts differ by at most one.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{FoldSplit, GraphDataset};

pub fn stratified_k_fold(dataset: &GraphDataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::input(format!("fold count {k} below minimum 2")));
    }
    // Classes smaller than k are legal (leave-one-out on a tiny dataset
    // needs them); the hard floor is one graph per fold overall.
    if dataset.len() < k {
        return Err(Error::constraint(format!(
            "{} graphs cannot fill {k} folds",
            dataset.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; dataset.len()];
    let mut pos = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &idx in members.iter() {
            assignments[idx] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldSplit { k, assignments })
}
