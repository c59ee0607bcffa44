//! Fully connected layer: `y = x W + b`.

use super::conv::{gemm_nt, gemm_tn};
use super::OpsError;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug)]
pub struct DenseCtx {
    input: Tensor,
    weights: Tensor,
}

#[derive(Debug)]
pub struct DenseGrads {
    pub x: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_forward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, DenseCtx), OpsError> {
    let (n, d_in) = match x.shape()[..] {
        [n, d] => (n, d),
        _ => {
            return Err(TensorError::RankMismatch {
                expected: 2,
                shape: x.shape().to_vec(),
            }
            .into())
        }
    };
    let (w_in, d_out) = match weights.shape()[..] {
        [a, b] => (a, b),
        _ => {
            return Err(TensorError::RankMismatch {
                expected: 2,
                shape: weights.shape().to_vec(),
            }
            .into())
        }
    };
    if w_in != d_in {
        return Err(OpsError::LengthMismatch {
            what: "dense input features",
            expected: w_in,
            actual: d_in,
        });
    }
    if bias.shape() != [d_out] {
        return Err(OpsError::LengthMismatch {
            what: "dense bias features",
            expected: d_out,
            actual: bias.len(),
        });
    }
    let mut out = x.matmul(weights)?;
    for row in out.data_mut().chunks_exact_mut(d_out) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    let _ = n;
    Ok((
        out,
        DenseCtx {
            input: x.clone(),
            weights: weights.clone(),
        },
    ))
}

pub fn dense_backward(ctx: &DenseCtx, grad_out: &Tensor) -> Result<DenseGrads, OpsError> {
    let [n, d_in]: [usize; 2] = ctx.input.shape().try_into().expect("ctx input is rank 2");
    let [_, d_out]: [usize; 2] = ctx.weights.shape().try_into().expect("ctx weights are rank 2");
    if grad_out.shape() != [n, d_out] {
        return Err(OpsError::LengthMismatch {
            what: "dense grad_out elements",
            expected: n * d_out,
            actual: grad_out.len(),
        });
    }
    let mut grad_bias = vec![0.0f64; d_out];
    for row in grad_out.data().chunks_exact(d_out) {
        for (b, &v) in grad_bias.iter_mut().zip(row) {
            *b += v;
        }
    }
    let grad_w = gemm_tn(&ctx.input, grad_out, n, d_in, d_out);
    let grad_x = gemm_nt(grad_out, &ctx.weights, n, d_out, d_in);
    Ok(DenseGrads {
        x: grad_x,
        weights: grad_w,
        bias: Tensor::new([d_out], grad_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let w = Tensor::identity(3).unwrap();
        let b = Tensor::zeros([3]).unwrap();
        let (y, _) = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn grad_bias_is_column_sum() {
        let x = Tensor::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::new([2, 3], vec![0.5; 6]).unwrap();
        let b = Tensor::zeros([3]).unwrap();
        let (_, ctx) = dense_forward(&x, &w, &b).unwrap();
        let g = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]).unwrap();
        let grads = dense_backward(&ctx, &g).unwrap();
        assert_eq!(grads.bias.data(), &[11.0, 22.0, 33.0]);
    }

    #[test]
    fn feature_mismatch_is_an_error() {
        let x = Tensor::zeros([2, 3]).unwrap();
        let w = Tensor::zeros([4, 2]).unwrap();
        let b = Tensor::zeros([2]).unwrap();
        assert!(dense_forward(&x, &w, &b).is_err());
    }
}
