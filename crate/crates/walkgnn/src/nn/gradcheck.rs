//! Central-difference gradient verification, the oracle every block's
//! backward pass is tested against.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::params::ParameterStore;
use super::tensor::Tensor;

/// Compares the analytic gradient of `f` against central differences for
/// every coordinate of every named parameter and returns the worst
/// relative error, with denominator `max(|analytic|, |numeric|, 1e-4)`.
///
/// The denominator floor doubles as an absolute tolerance for
/// near-zero gradients. Relu nets under absolute-error losses routinely
/// produce coordinates whose true gradient cancels to exactly zero while
/// the re-evaluated loss still moves by an ulp, so for losses of order
/// one the floor must sit well above `ulp / (2h)`.
///
/// `f` evaluates a scalar loss at the given parameters and returns it with
/// its gradients (typically: build a tape, run backward). Parameters
/// missing from the gradient map count as zero, matching the tape's
/// unreached-parameter convention.
pub fn finite_difference_check<F>(
    store: &ParameterStore,
    names: &[String],
    h: f64,
    f: F,
) -> Result<f64>
where
    F: Fn(&ParameterStore) -> Result<(f64, BTreeMap<String, Tensor>)>,
{
    if h <= 0.0 {
        return Err(Error::input(format!("step size {h} must be positive")));
    }
    let (_, grads) = f(store)?;
    let mut work = store.clone();
    let mut max_rel: f64 = 0.0;
    for name in names {
        let base = store.get(name)?.clone();
        let analytic = grads.get(name);
        for i in 0..base.len() {
            let orig = base.data()[i];
            work.set_coord(name, i, orig + h)?;
            let plus = f(&work)?.0;
            work.set_coord(name, i, orig - h)?;
            let minus = f(&work)?.0;
            work.set_coord(name, i, orig)?;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.map_or(0.0, |t| t.data()[i]);
            let denom = a.abs().max(numeric.abs()).max(1e-4);
            max_rel = max_rel.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, NodeFeatureMatrix};
    use crate::nn::blocks::{init_mpnn, mpnn_forward, MpnnSpec};
    use crate::nn::tape::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_matches_to_high_precision() {
        let mut store = ParameterStore::new();
        store.insert("theta", Tensor::scalar(3.0)).unwrap();
        let err = finite_difference_check(&store, &["theta".to_string()], 1e-4, |s| {
            let mut tape = Tape::new();
            let t = tape.param(s, "theta")?;
            let sq = tape.dot(t, t)?;
            Ok((tape.value(sq).item()?, tape.backward(sq)?))
        })
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let mut store = ParameterStore::new();
        store.insert("theta", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let err = finite_difference_check(&store, &["theta".to_string()], 1e-4, |s| {
            let mut tape = Tape::new();
            let _ = tape.param(s, "theta")?;
            let c = tape.constant(Tensor::scalar(7.0));
            Ok((tape.value(c).item()?, tape.backward(c)?))
        })
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn full_message_passer_with_ce_loss_passes() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let x = NodeFeatureMatrix::one_hot(&[0, 1, 0, 1, 0], 2).unwrap();
        let spec = MpnnSpec::new(3, 2, 4, 3).unwrap();
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        init_mpnn(&mut store, "theta", &spec, &mut rng).unwrap();
        let names = store.names();
        let err = finite_difference_check(&store, &names, 1e-4, |s| {
            let mut tape = Tape::new();
            let z = mpnn_forward(&mut tape, s, "theta", &spec, &g, &x)?;
            let pooled = tape.mean_rows(z, &[0, 1, 2, 3, 4])?;
            let loss = tape.softmax_cross_entropy(pooled, 1)?;
            Ok((tape.value(loss).item()?, tape.backward(loss)?))
        })
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}
