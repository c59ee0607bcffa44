//! Inverted dropout: survivors are scaled by `1/(1-rate)` at training time
//! so inference is the exact identity.

use rand::Rng;

use super::{Mode, OpsError};
use crate::tensor::Tensor;
use crate::SeededRng;

#[derive(Debug)]
pub enum DropoutCtx {
    /// Inference mode or rate 0: backward passes gradients through.
    Identity,
    /// Per-element multipliers, each 0 or `1/(1-rate)`.
    Masked(Tensor),
}

pub fn dropout_forward(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<(Tensor, DropoutCtx), OpsError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(OpsError::InvalidRate { rate });
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.clone(), DropoutCtx::Identity));
    }
    let scale = 1.0 / (1.0 - rate);
    let mask = Tensor::from_fn(x.shape().to_vec(), |_| {
        if rng.gen::<f64>() < rate {
            0.0
        } else {
            scale
        }
    })?;
    let out = x.mul(&mask)?;
    Ok((out, DropoutCtx::Masked(mask)))
}

pub fn dropout_backward(ctx: &DropoutCtx, grad_out: &Tensor) -> Result<Tensor, OpsError> {
    match ctx {
        DropoutCtx::Identity => Ok(grad_out.clone()),
        DropoutCtx::Masked(mask) => Ok(grad_out.mul(mask)?),
    }
}
