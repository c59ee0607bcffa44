//! ReLU activation. The subgradient at exactly 0 is taken as 0.

use super::OpsError;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct ReluCtx {
    input: Tensor,
}

pub fn relu_forward(x: &Tensor) -> (Tensor, ReluCtx) {
    (x.map(|v| v.max(0.0)), ReluCtx { input: x.clone() })
}

pub fn relu_backward(ctx: &ReluCtx, grad_out: &Tensor) -> Result<Tensor, OpsError> {
    if grad_out.shape() != ctx.input.shape() {
        return Err(OpsError::LengthMismatch {
            what: "relu grad_out elements",
            expected: ctx.input.len(),
            actual: grad_out.len(),
        });
    }
    let data = ctx
        .input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::new(ctx.input.shape().to_vec(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives_and_zero() {
        let x = Tensor::new([3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (y, _) = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn all_positive_is_identity() {
        let x = Tensor::new([4], vec![0.5, 1.0, 2.0, 3.5]).unwrap();
        let (y, _) = relu_forward(&x);
        assert_eq!(y, x);
    }

    #[test]
    fn backward_masks_at_and_below_zero() {
        let x = Tensor::new([3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (_, ctx) = relu_forward(&x);
        let g = Tensor::new([3], vec![10.0, 10.0, 10.0]).unwrap();
        let gx = relu_backward(&ctx, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.0, 10.0]);
    }
}
