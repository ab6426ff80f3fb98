//! Plain (gradient-free) loss functions. The taped counterparts live on
//! [`super::tape::Tape`]; both share one kernel.

use crate::error::{Error, Result};

use super::kernels;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    kernels::softmax(logits)
}

/// `-log softmax(logits)[label]`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::input(format!(
            "class label {label} out of range for {} logits",
            logits.len()
        )));
    }
    Ok(kernels::softmax_ce(logits, label))
}

pub fn l1(pred: f64, target: f64) -> f64 {
    (pred - target).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cost_ln_2() {
        let l = softmax_cross_entropy(&[0.0, 0.0], 0).unwrap();
        assert!((l - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_cost_nearly_nothing() {
        let l = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        assert!(l < 1e-8);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0, 0.0], 2),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1(2.0, 3.0), 1.0);
        assert_eq!(l1(4.5, 4.5), 0.0);
    }
}
