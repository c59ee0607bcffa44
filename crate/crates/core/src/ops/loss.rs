//! Softmax cross-entropy loss with max-subtraction stabilization.

use super::OpsError;
use crate::tensor::{Tensor, TensorError};

/// Loss value, gradient with respect to the logits, and the softmax
/// probabilities (kept for prediction and probability-density reports).
#[derive(Debug)]
pub struct SoftmaxXent {
    pub loss: f64,
    pub grad_logits: Tensor,
    pub probs: Tensor,
}

/// Mean over the batch of `-log softmax(logits)[label]`. The gradient is
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<SoftmaxXent, OpsError> {
    let (n, k) = match logits.shape()[..] {
        [n, k] => (n, k),
        _ => {
            return Err(TensorError::RankMismatch {
                expected: 2,
                shape: logits.shape().to_vec(),
            }
            .into())
        }
    };
    if labels.len() != n {
        return Err(OpsError::LengthMismatch {
            what: "label count",
            expected: n,
            actual: labels.len(),
        });
    }
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(OpsError::LabelOutOfRange {
                index: i,
                label,
                classes: k,
            });
        }
    }
    let mut probs = vec![0.0f64; n * k];
    let mut grad = vec![0.0f64; n * k];
    let mut loss = 0.0f64;
    let inv_n = 1.0 / n as f64;
    for (row, &label) in labels.iter().enumerate() {
        let lrow = &logits.data()[row * k..(row + 1) * k];
        let max = lrow.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut denom = 0.0;
        for (j, &v) in lrow.iter().enumerate() {
            let e = (v - max).exp();
            probs[row * k + j] = e;
            denom += e;
        }
        let log_denom = denom.ln();
        for j in 0..k {
            let p = probs[row * k + j] / denom;
            probs[row * k + j] = p;
            grad[row * k + j] = (p - if j == label { 1.0 } else { 0.0 }) * inv_n;
        }
        loss += -(lrow[label] - max - log_denom);
    }
    loss *= inv_n;
    Ok(SoftmaxXent {
        loss,
        grad_logits: Tensor::new([n, k], grad)?,
        probs: Tensor::new([n, k], probs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::zeros([4, 10]).unwrap();
        let out = softmax_cross_entropy(&logits, &[0, 3, 5, 9]).unwrap();
        assert!((out.loss - (10.0f64).ln()).abs() <= 1e-12);
        // Rows sum to 1.
        for row in out.probs.data().chunks_exact(10) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn saturated_true_logit_has_negligible_loss() {
        let mut logits = Tensor::zeros([1, 5]).unwrap();
        logits.data_mut()[2] = 1000.0;
        let out = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(out.loss <= 1e-6);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn label_out_of_range_errors() {
        let logits = Tensor::zeros([2, 3]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&logits, &[1, 3]),
            Err(OpsError::LabelOutOfRange {
                index: 1,
                label: 3,
                classes: 3
            })
        ));
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let logits = Tensor::new([1, 3], vec![1e4, -1e4, 0.0]).unwrap();
        let out = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(out.loss.is_finite());
        assert!(out.grad_logits.data().iter().all(|v| v.is_finite()));
    }
}
