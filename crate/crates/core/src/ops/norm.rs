//! Batch normalization over the channel (last) axis.
//!
//! Training mode normalizes each channel over all remaining axes with the
//! biased batch variance, then scales by gamma and shifts by beta, and
//! updates the running statistics as
//! `running = momentum * running + (1 - momentum) * batch`. Inference mode
//! normalizes with the running statistics.

use super::{Mode, OpsError};
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct BatchNormCtx {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    gamma: Tensor,
    mode: Mode,
}

#[derive(Debug)]
pub struct BatchNormGrads {
    pub x: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

fn channel_count(x: &Tensor) -> usize {
    *x.shape().last().expect("tensors have rank >= 1")
}

#[allow(clippy::too_many_arguments)]
pub fn batchnorm_forward(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
    mode: Mode,
    momentum: f64,
    eps: f64,
) -> Result<(Tensor, BatchNormCtx), OpsError> {
    let c = channel_count(x);
    for (t, name) in [
        (gamma, "gamma"),
        (beta, "beta"),
        (&*running_mean, "running_mean"),
        (&*running_var, "running_var"),
    ] {
        if t.shape() != [c] {
            return Err(OpsError::LengthMismatch {
                what: match name {
                    "gamma" => "batchnorm gamma channels",
                    "beta" => "batchnorm beta channels",
                    "running_mean" => "batchnorm running_mean channels",
                    _ => "batchnorm running_var channels",
                },
                expected: c,
                actual: t.len(),
            });
        }
    }
    let m = x.len() / c;
    let (mean, var) = match mode {
        Mode::Train => {
            if x.shape()[0] < 2 {
                return Err(OpsError::BatchTooSmall { n: x.shape()[0] });
            }
            let mut mean = vec![0.0f64; c];
            for (i, &v) in x.data().iter().enumerate() {
                mean[i % c] += v;
            }
            for v in &mut mean {
                *v /= m as f64;
            }
            let mut var = vec![0.0f64; c];
            for (i, &v) in x.data().iter().enumerate() {
                let d = v - mean[i % c];
                var[i % c] += d * d;
            }
            for v in &mut var {
                *v /= m as f64; // biased (population) estimate
            }
            for ch in 0..c {
                running_mean.data_mut()[ch] =
                    momentum * running_mean.data()[ch] + (1.0 - momentum) * mean[ch];
                running_var.data_mut()[ch] =
                    momentum * running_var.data()[ch] + (1.0 - momentum) * var[ch];
            }
            (mean, var)
        }
        Mode::Infer => (running_mean.data().to_vec(), running_var.data().to_vec()),
    };
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let mut x_hat = vec![0.0f64; x.len()];
    for (i, &v) in x.data().iter().enumerate() {
        x_hat[i] = (v - mean[i % c]) * inv_std[i % c];
    }
    let mut out = vec![0.0f64; x.len()];
    let gd = gamma.data();
    let bd = beta.data();
    for (i, &h) in x_hat.iter().enumerate() {
        out[i] = gd[i % c] * h + bd[i % c];
    }
    Ok((
        Tensor::new(x.shape().to_vec(), out)?,
        BatchNormCtx {
            x_hat: Tensor::new(x.shape().to_vec(), x_hat)?,
            inv_std,
            gamma: gamma.clone(),
            mode,
        },
    ))
}

pub fn batchnorm_backward(
    ctx: &BatchNormCtx,
    grad_out: &Tensor,
) -> Result<BatchNormGrads, OpsError> {
    if grad_out.shape() != ctx.x_hat.shape() {
        return Err(OpsError::LengthMismatch {
            what: "batchnorm grad_out elements",
            expected: ctx.x_hat.len(),
            actual: grad_out.len(),
        });
    }
    let c = channel_count(&ctx.x_hat);
    let m = ctx.x_hat.len() / c;
    let gd = grad_out.data();
    let hd = ctx.x_hat.data();

    let mut sum_g = vec![0.0f64; c];
    let mut sum_gh = vec![0.0f64; c];
    for i in 0..gd.len() {
        sum_g[i % c] += gd[i];
        sum_gh[i % c] += gd[i] * hd[i];
    }
    let grad_gamma = Tensor::new([c], sum_gh.clone())?;
    let grad_beta = Tensor::new([c], sum_g.clone())?;

    let gamma = ctx.gamma.data();
    let mut grad_x = vec![0.0f64; gd.len()];
    match ctx.mode {
        Mode::Train => {
            // Batch statistics depend on x, so the mean terms feed back.
            let inv_m = 1.0 / m as f64;
            for i in 0..gd.len() {
                let ch = i % c;
                grad_x[i] = gamma[ch]
                    * ctx.inv_std[ch]
                    * (gd[i] - sum_g[ch] * inv_m - hd[i] * sum_gh[ch] * inv_m);
            }
        }
        Mode::Infer => {
            // Running statistics are constants.
            for i in 0..gd.len() {
                let ch = i % c;
                grad_x[i] = gamma[ch] * ctx.inv_std[ch] * gd[i];
            }
        }
    }
    Ok(BatchNormGrads {
        x: Tensor::new(ctx.x_hat.shape().to_vec(), grad_x)?,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}
